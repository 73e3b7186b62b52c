import init, { converse_trend, poisson_overlap, dif_lower_curve } from "../pkg/dtpc_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function call(fn, out, ...args) {
  const v = JSON.parse(fn(...args));
  out.classList.toggle("error", "error" in v);
  if ("error" in v) {
    out.textContent = v.error;
    return null;
  }
  return v;
}

function frame(canvas, xs, ys, { logx = false } = {}) {
  const ctx = canvas.getContext("2d");
  const pad = 40;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const fx = logx ? Math.log : (x) => x;
  const [x0, x1] = [Math.min(...xs.map(fx)), Math.max(...xs.map(fx))];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const px = (x) => pad + ((fx(x) - x0) / (x1 - x0 || 1)) * w;
  const py = (y) => pad + h - ((y - y0) / (y1 - y0)) * h;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#555";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, pad + h);
  return { ctx, px, py };
}

function line(ctx, px, py, xs, ys, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawTrend() {
  const out = $("t-out");
  const v = call(converse_trend, out, num("t-kappa"), num("t-l1"), num("t-l2"), num("t-dark"), num("t-ets"));
  if (!v) return;
  const xs = v.points.map((p) => p.n);
  const ys = v.points.map((p) => p.normalized);
  const { ctx, px, py } = frame($("t-plot"), xs, [...ys, v.target], { logx: true });
  line(ctx, px, py, xs, ys, "#1565c0");
  line(ctx, px, py, [xs[0], xs[xs.length - 1]], [v.target, v.target], "#c62828", [6, 4]);
  out.textContent = v.points.map((p) => `n=${p.n}\tK=${p.memory}\t${p.normalized.toFixed(4)}`).join("\n")
    + `\ntarget (1+κ)/2 = ${v.target}`;
}

function drawOverlap() {
  const out = $("o-out");
  const [m1, m2] = [num("o-mu1"), num("o-mu2")];
  $("o-mu1-v").textContent = m1.toFixed(1);
  $("o-mu2-v").textContent = m2.toFixed(1);
  const v = call(poisson_overlap, out, m1, m2);
  if (!v) return;
  const xs = v.pmf1.map((_, i) => i);
  const { ctx, px, py } = frame($("o-plot"), xs.length > 1 ? xs : [0, 1], [0, ...v.pmf1, ...v.pmf2]);
  const bw = Math.max(1, (px(1) - px(0)) / 2 - 1);
  [[v.pmf1, "rgba(21,101,192,.7)", -bw], [v.pmf2, "rgba(198,40,40,.7)", 0]].forEach(([pmf, color, dx]) => {
    ctx.fillStyle = color;
    pmf.forEach((p, i) => ctx.fillRect(px(i) + dx, py(p), bw, py(0) - py(p)));
  });
  out.textContent =
    `F² = ${v.bhattacharyya_sq.toExponential(6)}   F = ${v.fidelity.toFixed(6)}\n` +
    `1 − F = ${v.tv_lower.toFixed(6)}  ≤  TV = ${v.tv.toFixed(6)}  ≤  √(1 − F²) = ${v.tv_upper.toFixed(6)}`;
}

function drawLower() {
  const out = $("l-out");
  const probs = $("l-probs").value.split(/[\s,]+/).filter(Boolean).map(Number);
  const v = call(dif_lower_curve, out, new Float64Array(probs), num("l-dark"), num("l-max"));
  if (!v) return;
  const xs = v.map((p) => p.energy_ts);
  const ex = v.map((p) => p.exact);
  const as = v.map((p) => p.asymptotic);
  const { ctx, px, py } = frame($("l-plot"), xs, [...ex, ...as], { logx: true });
  line(ctx, px, py, xs, ex, "#1565c0");
  line(ctx, px, py, xs, as, "#c62828", [6, 4]);
  const last = v[v.length - 1];
  out.textContent = `solid: block-averaged pilot entropy, dashed: ½ log2(2πe Ê T_s)\n` +
    `at Ê T_s = ${last.energy_ts.toFixed(1)}: ${last.exact.toFixed(5)} vs ${last.asymptotic.toFixed(5)} bits`;
}

await init();
for (const id of ["t-kappa", "t-l1", "t-l2", "t-dark", "t-ets"]) $(id).addEventListener("input", drawTrend);
for (const id of ["o-mu1", "o-mu2"]) $(id).addEventListener("input", drawOverlap);
for (const id of ["l-probs", "l-dark", "l-max"]) $(id).addEventListener("input", drawLower);
drawTrend();
drawOverlap();
drawLower();
