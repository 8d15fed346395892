// Plain canvas plotting around the wasm exports.
import init, { bound_curves, output_landscape, stability_trace } from "./pkg/qnn_stability_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function niceTicks(lo, hi, n = 5) {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const mult = [1, 2, 5, 10].find((m) => span / (m * step) <= n) * step;
  const ticks = [];
  for (let v = Math.ceil(lo / mult) * mult; v <= hi + 1e-12; v += mult) ticks.push(v);
  return ticks;
}

// series: [{xs, ys, color, dashed, label}]
function plot(canvas, series, { xlabel = "", ylabel = "" } = {}) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  const pad = { l: 58, r: 12, t: 10, b: 36 };
  const finite = (v) => Number.isFinite(v);
  const xs = series.flatMap((s) => s.xs).filter(finite);
  const ys = series.flatMap((s) => s.ys).filter(finite);
  if (!xs.length || !ys.length) return;
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#555";
  ctx.font = "11px system-ui";
  ctx.lineWidth = 1;
  for (const t of niceTicks(y0, y1)) {
    ctx.beginPath(); ctx.moveTo(pad.l, py(t)); ctx.lineTo(w - pad.r, py(t)); ctx.stroke();
    ctx.fillText(+t.toPrecision(3), 4, py(t) + 4);
  }
  for (const t of niceTicks(x0, x1)) {
    ctx.fillText(+t.toPrecision(3), px(t) - 8, h - pad.b + 14);
  }
  ctx.fillText(xlabel, w / 2, h - 4);
  ctx.save(); ctx.translate(12, pad.t + 40); ctx.rotate(-Math.PI / 2); ctx.fillText(ylabel, -30, 0); ctx.restore();

  series.forEach((s, i) => {
    ctx.strokeStyle = s.color || COLORS[i % COLORS.length];
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.lineWidth = 1.8;
    ctx.beginPath();
    let pen = false;
    s.xs.forEach((x, k) => {
      const y = s.ys[k];
      if (!finite(y)) { pen = false; return; }
      pen ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      pen = true;
    });
    ctx.stroke();
    if (s.label) {
      ctx.setLineDash([]);
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText(s.label, w - pad.r - 90, pad.t + 14 + 14 * i);
    }
  });
  ctx.setLineDash([]);
}

function guard(fn) {
  try {
    fn();
    $("status").textContent = "";
    $("status").className = "note";
  } catch (e) {
    $("status").textContent = String(e.message || e);
    $("status").className = "err";
  }
}

function drawBounds() {
  guard(() => {
    const tMax = num("b-t");
    const levels = $("b-p").value.split(",").map(Number).filter((v) => !Number.isNaN(v));
    const flat = bound_curves(num("b-k"), num("b-m"), num("b-eta"), tMax, new Float64Array(levels));
    const ts = Array.from({ length: tMax }, (_, i) => i + 1);
    const series = levels.map((p, i) => ({
      xs: ts,
      ys: Array.from(flat.subarray(i * tMax, (i + 1) * tMax)),
      label: `p = ${p}`,
    }));
    plot($("b-canvas"), series, { xlabel: "T", ylabel: "log10 ε" });
  });
}

function drawLandscape() {
  $("l-pv").textContent = $("l-p").value;
  guard(() => {
    const v = output_landscape(num("l-n"), num("l-l"), num("l-j"), num("l-p"), BigInt(num("l-seed")), 181);
    const pick = (o) => Array.from({ length: v.length / 3 }, (_, i) => v[3 * i + o]);
    const xs = pick(0);
    plot($("l-canvas"), [
      { xs, ys: pick(1), label: "f" },
      { xs, ys: pick(2), dashed: true, label: "∂f/∂θ_j" },
    ], { xlabel: "θ_j", ylabel: "value" });
  });
}

function drawTrace() {
  guard(() => {
    const v = stability_trace(num("s-n"), num("s-l"), num("s-m"), num("s-eta"), num("s-t"), num("s-seeds"), 7n);
    const n = v.length / 2;
    const xs = Array.from({ length: n }, (_, i) => i);
    const lg = (o) => xs.map((i) => (v[2 * i + o] > 0 ? Math.log10(v[2 * i + o]) : NaN));
    plot($("s-canvas"), [
      { xs, ys: lg(0), label: "measured δ_t" },
      { xs, ys: lg(1), dashed: true, label: "envelope" },
    ], { xlabel: "t", ylabel: "log10 δ" });
  });
}

await init();
for (const id of ["b-k", "b-m", "b-eta", "b-t", "b-p"]) $(id).addEventListener("input", drawBounds);
for (const id of ["l-n", "l-l", "l-j", "l-seed", "l-p"]) $(id).addEventListener("input", drawLandscape);
$("s-run").addEventListener("click", drawTrace);
window.addEventListener("resize", () => { drawBounds(); drawLandscape(); drawTrace(); });
drawBounds();
drawLandscape();
drawTrace();
