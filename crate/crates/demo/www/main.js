import init, { kwHeatmap, pulse, krigeSlice, version } from "./pkg/wavegp_demo.js";

const X_MAX = 2, T_MAX = 1.5;

function controls(section) {
  const el = document.getElementById(section);
  const get = () => Object.fromEntries([...el.querySelectorAll("input")].map(i => [i.name, parseFloat(i.value)]));
  return { el, get, canvas: el.querySelector("canvas"), out: el.querySelector(".out") };
}

// blue - white - red, alpha from 0..1
function color(v, alpha = 1) {
  const s = Math.max(-1, Math.min(1, v));
  const r = s > 0 ? 255 : Math.round(255 * (1 + s));
  const b = s < 0 ? 255 : Math.round(255 * (1 - s));
  const g = Math.round(255 * (1 - Math.abs(s)));
  return [r, g, b, Math.round(255 * alpha)];
}

function paint(canvas, nx, nt, value, alpha = () => 1) {
  const off = new OffscreenCanvas(nx, nt);
  const ctx = off.getContext("2d");
  const img = ctx.createImageData(nx, nt);
  for (let i = 0; i < nx * nt; i++) img.data.set(color(value(i), alpha(i)), 4 * i);
  ctx.putImageData(img, 0, 0);
  const c = canvas.getContext("2d");
  c.imageSmoothingEnabled = false;
  c.clearRect(0, 0, canvas.width, canvas.height);
  c.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function timed(out, f) {
  const t0 = performance.now();
  try {
    f();
    out.textContent = `${(performance.now() - t0).toFixed(0)} ms`;
  } catch (e) {
    out.textContent = e.message;
  }
}

function covariance() {
  const ui = controls("cov");
  const draw = () => timed(ui.out, () => {
    const p = ui.get();
    const nx = 48, nt = 36;
    const h = kwHeatmap(p.c, p.ku, p.kv, p.tref, nx, nt, X_MAX, T_MAX);
    const peak = h.reduce((m, v) => Math.max(m, Math.abs(v)), 1e-300);
    paint(ui.canvas, nx, nt, i => h[i] / peak);
  });
  ui.el.addEventListener("change", draw);
  draw();
}

function propagation() {
  const ui = controls("pulse");
  const draw = () => timed(ui.out, () => {
    const p = ui.get();
    const n = 300;
    const u = pulse(p.c, p.w, p.t, n, X_MAX);
    const c = ui.canvas.getContext("2d");
    const { width, height } = ui.canvas;
    c.clearRect(0, 0, width, height);
    c.strokeStyle = "#ccc";
    c.beginPath(); c.moveTo(0, height / 2); c.lineTo(width, height / 2); c.stroke();
    c.strokeStyle = "#b22";
    c.beginPath();
    u.forEach((v, i) => {
      const x = (i / (n - 1)) * width, y = height / 2 - v * height * 0.45;
      i ? c.lineTo(x, y) : c.moveTo(x, y);
    });
    c.stroke();
  });
  ui.el.addEventListener("input", draw);
  draw();
}

function kriging() {
  const ui = controls("krige");
  const obs = { x: [], t: [], v: [] };
  const nx = 32, nt = 24;
  const draw = () => timed(ui.out, () => {
    const c = ui.canvas.getContext("2d");
    if (obs.x.length === 0) {
      c.clearRect(0, 0, ui.canvas.width, ui.canvas.height);
      return;
    }
    const p = ui.get();
    const r = krigeSlice(p.c, p.l, Float64Array.from(obs.x), Float64Array.from(obs.t), Float64Array.from(obs.v),
      nx, nt, X_MAX, T_MAX);
    paint(ui.canvas, nx, nt, i => r[2 * i], i => 1 - Math.min(1, r[2 * i + 1]));
    c.strokeStyle = "#000";
    obs.x.forEach((x, k) => {
      const px = (x / X_MAX + 1) / 2 * ui.canvas.width, py = (1 - (obs.t[k] / T_MAX + 1) / 2) * ui.canvas.height;
      c.strokeRect(px - 3, py - 3, 6, 6);
    });
  });
  ui.canvas.addEventListener("click", e => {
    if (e.shiftKey) {
      obs.x.length = obs.t.length = obs.v.length = 0;
    } else {
      const b = ui.canvas.getBoundingClientRect();
      obs.x.push(((e.clientX - b.left) / b.width * 2 - 1) * X_MAX);
      obs.t.push((1 - (e.clientY - b.top) / b.height * 2) * T_MAX);
      obs.v.push(ui.get().v);
    }
    draw();
  });
  ui.el.addEventListener("change", e => { if (e.target.name !== "v") draw(); });
}

await init();
document.title = `wavegp ${version()} demo`;
covariance();
propagation();
kriging();
