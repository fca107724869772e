import init, { cascade_image, cascade_estimated_spectrum, cascade_analytic_spectrum, SceneDemo } from "./pkg/mfwater_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function blit(canvas, rgba, side) {
  const tmp = new OffscreenCanvas(side, side);
  tmp.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), side, side), 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

// curves: list of [flat alpha,f array, colour, dots?]
function plot(canvas, curves, box) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, m = 30;
  ctx.clearRect(0, 0, W, H);
  let xs = [], ys = [0, 2];
  for (const [c] of curves) for (let i = 0; i < c.length; i += 2) { xs.push(c[i]); ys.push(c[i + 1]); }
  if (!xs.length) return;
  const x0 = Math.min(...xs), x1 = Math.max(...xs), y0 = Math.min(...ys), y1 = Math.max(...ys);
  const px = (x) => m + (x - x0) / (x1 - x0 || 1) * (W - 2 * m);
  const py = (y) => H - m - (y - y0) / (y1 - y0 || 1) * (H - 2 * m);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(m, m, W - 2 * m, H - 2 * m);
  ctx.fillStyle = "#333";
  ctx.fillText(x0.toFixed(2), m, H - 10);
  ctx.fillText(x1.toFixed(2), W - m - 20, H - 10);
  ctx.fillText(y1.toFixed(2), 2, m + 4);
  ctx.fillText(y0.toFixed(2), 2, H - m);
  if (box) {
    ctx.fillStyle = "rgba(30,90,220,0.15)";
    const [a0, a1, f0, f1] = box;
    ctx.fillRect(px(a0), py(f1), px(a1) - px(a0), py(f0) - py(f1));
  }
  for (const [c, colour, dots] of curves) {
    ctx.strokeStyle = ctx.fillStyle = colour;
    ctx.beginPath();
    for (let i = 0; i < c.length; i += 2) {
      if (dots) ctx.fillRect(px(c[i]) - 2, py(c[i + 1]) - 2, 4, 4);
      else if (i === 0) ctx.moveTo(px(c[i]), py(c[i + 1]));
      else ctx.lineTo(px(c[i]), py(c[i + 1]));
    }
    ctx.stroke();
  }
}

function runCascade() {
  const w = ["w0", "w1", "w2", "w3"].map(num);
  const depth = Math.max(2, Math.min(10, parseInt($("depth").value)));
  const seed = $("cseed").value === "" ? undefined : BigInt($("cseed").value);
  try {
    blit($("cascade-img"), cascade_image(...w, depth, seed), 1 << depth);
    const est = cascade_estimated_spectrum(...w, depth, seed);
    const exact = cascade_analytic_spectrum(...w, depth);
    plot($("cascade-plot"), [[exact, "#000"], [est, "#e08000", true]]);
  } catch (e) {
    alert(e.message ?? e);
  }
}

let scene = null;

function runScene() {
  $("scene-status").textContent = "computing...";
  setTimeout(() => {
    const t0 = performance.now();
    try {
      scene?.free();
      scene = new SceneDemo(parseInt($("side").value), BigInt($("sseed").value || 0));
    } catch (e) {
      $("scene-status").textContent = e.message ?? String(e);
      return;
    }
    const side = scene.side();
    const [lo, hi] = scene.alpha_range();
    $("scene-status").textContent = `${side}x${side}, alpha ${lo.toFixed(2)} to ${hi.toFixed(2)}, ${((performance.now() - t0) / 1000).toFixed(1)} s`;
    blit($("scene-img"), scene.scene_image(), side);
    blit($("alpha-img"), scene.alpha_image(), side);
    runSegment();
  }, 10);
}

function runSegment() {
  if (!scene) return;
  const box = ["alo", "ahi", "flo", "fhi"].map(num);
  plot($("scene-plot"), [[scene.coarse_spectrum(), "#1e5adc", true]], box);
  try {
    blit($("mask-img"), scene.segment(...box, parseInt($("maj").value) || 0), scene.side());
    const m = JSON.parse(scene.metrics_json());
    $("metrics").textContent = ["accuracy", "sensitivity", "specificity", "ppv", "npv"]
      .map((k) => `${k.padEnd(12)} ${m[k] == null ? "n/a" : m[k].toFixed(2) + "%"}`)
      .join("\n");
  } catch (e) {
    $("metrics").textContent = e.message ?? String(e);
  }
}

await init();
$("cascade-run").onclick = runCascade;
$("scene-run").onclick = runScene;
for (const id of ["alo", "ahi", "flo", "fhi", "maj"]) $(id).oninput = runSegment;
runCascade();
runScene();
