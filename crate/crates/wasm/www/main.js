import init, { Session, stability_map, mode_radius } from "./pkg/svddf_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let session = null;
let running = false;

function paint(canvas, rgba, n, scale = 2) {
  canvas.width = n;
  canvas.height = n;
  canvas.style.width = `${n * scale}px`;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), n, n), 0, 0);
}

function drawCurves() {
  const c = $("curve");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const ssim = session.ssim_curve();
  const rde = session.rde_curve();
  const line = (values, lo, hi, colour) => {
    if (values.length < 2) return;
    ctx.strokeStyle = colour;
    ctx.beginPath();
    values.forEach((v, k) => {
      const x = (k / (values.length - 1)) * c.width;
      const y = c.height - ((Math.min(Math.max(v, lo), hi) - lo) / (hi - lo)) * c.height;
      k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  };
  line(Array.from(ssim), 0, 1, "#000");
  line(Array.from(rde, (r) => Math.log10(Math.max(r, 1e-12))), -8, 0, "#e07000");
}

function show() {
  const n = session.size();
  paint($("current"), session.current_rgba(), n);
  drawCurves();
  const ssim = session.ssim_curve();
  const stop = session.rde_stop(num("tol"));
  $("status").textContent =
    `step ${session.steps()}  t ${session.time().toFixed(4)}  SSIM ${ssim[ssim.length - 1].toFixed(4)}` +
    (stop > 0 ? `  (RDE below tol at step ${stop})` : "");
}

function reset() {
  running = false;
  if (session) session.free();
  try {
    session = new Session(num("size"), num("delta"), BigInt(num("seed")), num("p"), num("eta"), num("epsilon"), num("sigma"));
  } catch (e) {
    $("status").textContent = `error: ${e.message ?? e}`;
    session = null;
    return;
  }
  const n = session.size();
  paint($("clean"), session.clean_rgba(), n);
  paint($("noisy"), session.noisy_rgba(), n);
  show();
}

function advance(k) {
  try {
    session.step(k);
  } catch (e) {
    running = false;
    $("status").textContent = `error: ${e.message ?? e}`;
    return false;
  }
  show();
  return true;
}

function loop() {
  if (!running || !session) return;
  if (!advance(25) || session.rde_stop(num("tol")) > 0 || session.steps() >= 20000) {
    running = false;
    return;
  }
  requestAnimationFrame(loop);
}

function drawMap() {
  const c = $("map");
  const etaMax = 4;
  const sMax = 4;
  const img = stability_map(etaMax, sMax, c.width, c.height);
  const ctx = c.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(img), c.width, c.height), 0, 0);
  const toY = (s) => c.height - (s / sMax) * c.height;
  ctx.strokeStyle = "#000";
  ctx.setLineDash([5, 4]);
  ctx.beginPath();
  ctx.moveTo(0, toY(0));
  ctx.lineTo(c.width, toY(etaMax));
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.moveTo(0, toY(2));
  ctx.lineTo(c.width, toY(2));
  ctx.stroke();
  c.onclick = (ev) => {
    const r = c.getBoundingClientRect();
    const eta = (etaMax * (ev.clientX - r.left)) / r.width;
    const s = sMax * (1 - (ev.clientY - r.top) / r.height);
    $("radius").textContent = `eta ${eta.toFixed(3)}, dt*sqrt(lambda) ${s.toFixed(3)}: rho ${mode_radius(1, eta, s).toFixed(4)}`;
  };
}

await init();
$("reset").onclick = reset;
$("step").onclick = () => session && advance(50);
$("run").onclick = () => {
  if (!session) return;
  running = !running;
  loop();
};
reset();
drawMap();
