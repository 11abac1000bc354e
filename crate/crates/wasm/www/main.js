import init, { explore_weights, lp_pacing, auction_pacing } from "./pkg/paceforge_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

const num = (id) => Number(document.getElementById(id).value);
const str = (id) => document.getElementById(id).value;

function controller() {
  return { ai: num("ai"), ad: num("ad"), beta: num("beta"), s: num("s"), map: str("map") };
}

// Draws series (arrays of numbers) in the box [x0, x0 + w] of a canvas.
function plot(ctx, x0, w, series, opts = {}) {
  const h = ctx.canvas.height;
  const pad = 28;
  let lo = opts.lo ?? Infinity;
  let hi = opts.hi ?? -Infinity;
  for (const s of series) {
    for (const v of s.data) {
      if (!Number.isFinite(v)) continue;
      if (opts.lo === undefined) lo = Math.min(lo, v);
      if (opts.hi === undefined) hi = Math.max(hi, v);
    }
  }
  if (!(hi > lo)) { hi = lo + 1; }
  const n = Math.max(...series.map((s) => s.data.length));
  const X = (i) => x0 + pad + (i / Math.max(n - 1, 1)) * (w - pad - 8);
  const Y = (v) => h - pad - ((v - lo) / (hi - lo)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(x0 + pad, pad, w - pad - 8, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(3), x0 + 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), x0 + 2, h - pad);
  if (lo < 0 && hi > 0) {
    ctx.strokeStyle = "#ddd";
    ctx.beginPath();
    ctx.moveTo(X(0), Y(0));
    ctx.lineTo(X(n - 1), Y(0));
    ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1.5;
    ctx.setLineDash(s.dash ?? []);
    ctx.beginPath();
    s.data.forEach((v, i) => (i === 0 ? ctx.moveTo(X(i), Y(v)) : ctx.lineTo(X(i), Y(v))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function clear(id) {
  const ctx = document.getElementById(id).getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  return ctx;
}

// Column j of a row-major array with the given stride.
const column = (flat, stride, j) => Array.from({ length: flat.length / stride }, (_, t) => flat[t * stride + j]);

function report(id, fn) {
  const out = document.getElementById(id);
  out.classList.remove("err");
  try {
    out.textContent = fn();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function runWeights() {
  report("w-out", () => {
    const c = controller();
    const v = explore_weights(c.ai, c.ad, c.beta, num("w-t"));
    const ctx = clear("w-canvas");
    plot(ctx, 0, ctx.canvas.width, [
      { data: v.lambda, color: COLORS[0] },
      { data: v.q, color: COLORS[1] },
      { data: v.a, color: COLORS[2] },
    ]);
    const bound = Number.isNaN(v.abs_sum_bound) ? "n/a (complex roots)" : v.abs_sum_bound.toFixed(6);
    const negA = Array.from(v.a).some((x) => x < 0);
    const text = `controller ${v.kind}, ${v.roots}\n` +
      `sum |q| = ${v.abs_sum.toFixed(6)}   bound M = ${bound}\n` +
      `a_1 = ${v.a[0].toFixed(6)}   a_T = ${v.a[v.a.length - 1].toFixed(6)}   ${negA ? "some a_t < 0" : "all a_t >= 0"}`;
    v.free();
    return text;
  });
}

function runLp() {
  report("lp-out", () => {
    const c = controller();
    const t = lp_pacing(num("lp-m"), num("lp-d"), num("lp-t"), num("lp-seed"), c.ai, c.ad, c.beta, c.s, c.map);
    const m = t.m;
    const mu = t.mu;
    const spend = t.spend;
    const ctx = clear("lp-canvas");
    const half = ctx.canvas.width / 2;
    plot(ctx, 0, half, Array.from({ length: m }, (_, j) => ({ data: column(mu, m, j), color: COLORS[j % COLORS.length] })));
    const pace = Array.from({ length: spend.length / m }, (_, i) => (i + 1) / (spend.length / m));
    const lines = Array.from({ length: m }, (_, j) => ({ data: column(spend, m, j), color: COLORS[j % COLORS.length] }));
    lines.push({ data: pace, color: "#aaa", dash: [4, 4] });
    plot(ctx, half, half, lines, { lo: 0, hi: 1 });
    const text = `reward ${t.total_reward.toFixed(3)}   dual bound ${t.upper.toFixed(3)}   ratio ${t.ratio.toFixed(4)}   gate triggers ${t.gate_triggers}`;
    t.free();
    return text;
  });
}

function runAuction() {
  report("au-out", () => {
    const c = controller();
    const t = auction_pacing(num("au-t"), num("au-rho"), num("au-seed"), c.ai, c.ad, c.beta, c.s, c.map);
    const shade = Array.from(t.mu, (m) => 1 / (1 + m));
    const spend = t.spend;
    const ctx = clear("au-canvas");
    const half = ctx.canvas.width / 2;
    plot(ctx, 0, half, [{ data: shade, color: COLORS[0] }], { lo: 0, hi: 1 });
    const pace = Array.from(spend, (_, i) => (i + 1) / spend.length);
    plot(ctx, half, half, [
      { data: spend, color: COLORS[1] },
      { data: pace, color: "#aaa", dash: [4, 4] },
    ], { lo: 0, hi: 1 });
    const text = `surplus ${t.total_reward.toFixed(3)}   hindsight bound ${t.upper.toFixed(3)}   ratio ${t.ratio.toFixed(4)}   budget ${t.budget[0].toFixed(1)}`;
    t.free();
    return text;
  });
}

await init();
document.getElementById("w-run").addEventListener("click", runWeights);
document.getElementById("lp-run").addEventListener("click", runLp);
document.getElementById("au-run").addEventListener("click", runAuction);
document.getElementById("controller").addEventListener("change", () => { runWeights(); runLp(); runAuction(); });
runWeights();
runLp();
runAuction();
