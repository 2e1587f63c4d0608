import init, { curves, region, simulate } from "./pkg/rtc_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#000", "#888", "#c33", "#36c", "#393", "#c90"];

function call(fn, request, out) {
  try {
    return JSON.parse(fn(JSON.stringify(request)));
  } catch (e) {
    out.className = "err";
    out.textContent = String(e.message || e);
    return null;
  }
}

function plotCurves(canvas, data) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  const ymax = Math.max(0.05, ...data.curves.flatMap((c) => c.value.filter(Number.isFinite)));
  const x = (p) => pad + (p / 0.5) * (w - 2 * pad);
  const y = (v) => h - pad - (v / ymax) * (h - 2 * pad);
  g.clearRect(0, 0, w, h);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  g.fillStyle = "#444";
  g.fillText("p", w / 2, h - 10);
  g.fillText("0", pad - 10, h - pad + 12);
  g.fillText("0.5", w - pad - 8, h - pad + 12);
  g.fillText(ymax.toFixed(3), 2, pad + 4);
  data.curves.forEach((c, i) => {
    g.strokeStyle = COLORS[i % COLORS.length];
    g.beginPath();
    c.p.forEach((p, k) => (k ? g.lineTo(x(p), y(c.value[k])) : g.moveTo(x(p), y(c.value[k]))));
    g.stroke();
    g.fillStyle = g.strokeStyle;
    g.fillText(c.label, w - pad - 70, pad + 14 + 14 * i);
  });
}

function plotRegion(canvas, data, step) {
  const g = canvas.getContext("2d");
  const n = Math.round(0.5 / step) + 1;
  const cell = canvas.width / n;
  g.clearRect(0, 0, canvas.width, canvas.height);
  for (const [p, delta, flagged] of data.points) {
    const i = Math.round(p / step);
    const j = Math.round(delta / step);
    g.fillStyle = flagged ? "#c33" : "#eee";
    g.fillRect(i * cell, canvas.height - (j + 1) * cell, cell - 1, cell - 1);
  }
}

$("c-run").onclick = () => {
  const out = $("c-msg");
  out.className = "";
  const m = $("c-m").value.split(",").map((s) => Number(s.trim()));
  const data = call(curves, { delta: num("c-delta"), p_step: num("c-step"), d: num("c-d"), m }, out);
  if (!data) return;
  plotCurves($("c-plot"), data);
  out.textContent = data.flags.length ? `flags: ${data.flags.join(", ")}` : "";
};

$("r-run").onclick = () => {
  const out = $("r-msg");
  out.className = "";
  const step = num("r-step");
  const data = call(region, { step, d: num("r-d"), m: num("r-m"), margin: Number($("r-margin").value) }, out);
  if (!data) return;
  plotRegion($("r-plot"), data, step);
  out.textContent = "p → right, δ → up; red cells are flagged\n" + JSON.stringify(data.summary, null, 2);
};

$("s-run").onclick = () => {
  const out = $("s-msg");
  out.className = "";
  const request = {
    p: num("s-p"), delta: num("s-delta"), d: num("s-d"), m: num("s-m"),
    horizon: num("s-h"), replications: num("s-r"), seed: num("s-seed"),
  };
  const data = call(simulate, request, out);
  if (!data) return;
  const s = data.simulation;
  out.textContent =
    `solved D(${request.d}, ${request.m}) = ${data.solved_distortion.toFixed(6)}\n` +
    `simulated      = ${s.mean_distortion.toFixed(6)} ± ${s.std_error.toExponential(2)} (one standard error)`;
};

await init();
$("c-run").click();
