import init, { WasmTwin } from "./pkg/twinsim_wasm.js";

const $ = (id) => document.getElementById(id);
const canvas = $("view");
const ctx = canvas.getContext("2d");
const keys = new Set();

let twin = null;
let info = null;      // [w, h, res, ox, oy]
let truth = null;     // ImageBitmap-ready canvas of the true walls
let mapLayer = null;  // canvas of the estimated map
let frame = 0;
let last = 0;

// grid cells: 0 free, 100 occupied, 255 unknown
function paint(cells, w, h, colours) {
  const c = document.createElement("canvas");
  c.width = w;
  c.height = h;
  const img = c.getContext("2d").createImageData(w, h);
  for (let cy = 0; cy < h; cy++) {
    for (let cx = 0; cx < w; cx++) {
      const rgba = colours[cells[cy * w + cx]];
      if (!rgba) continue;
      const o = ((h - 1 - cy) * w + cx) * 4;
      img.data.set(rgba, o);
    }
  }
  c.getContext("2d").putImageData(img, 0, 0);
  return c;
}

function reset() {
  $("error").textContent = "";
  try {
    twin?.free();
    twin = new WasmTwin($("vehicle").value, $("scene").value);
    twin.set_mapping($("mapping").checked);
    if ($("autopilot").checked) twin.set_autopilot(true);
  } catch (e) {
    $("error").textContent = String(e);
    return;
  }
  info = twin.map_info();
  const [w, h] = info;
  const cells = twin.truth_cells();
  truth = cells.length ? paint(cells, w, h, { 100: [60, 60, 60, 90] }) : null;
  mapLayer = null;
}

function command() {
  const throttle = (keys.has("w") ? 0.5 : 0) - (keys.has("s") ? 0.4 : 0);
  const steering = (keys.has("a") ? 1 : 0) - (keys.has("d") ? 1 : 0);
  const brake = keys.has(" ") ? 1 : 0;
  return [throttle, steering, brake];
}

function view() {
  const [w, h, res, ox, oy] = info;
  const scale = Math.min(canvas.width / (w * res), canvas.height / (h * res));
  // world (x right, y up) to canvas pixels
  return {
    scale,
    px: (x) => (x - ox) * scale,
    py: (y) => canvas.height - (y - oy) * scale,
  };
}

function draw() {
  const [w, h, res] = info;
  const v = view();
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.imageSmoothingEnabled = false;
  const dw = w * res * v.scale;
  const dh = h * res * v.scale;
  if (mapLayer) ctx.drawImage(mapLayer, 0, canvas.height - dh, dw, dh);
  if (truth && $("truth").checked) ctx.drawImage(truth, 0, canvas.height - dh, dw, dh);

  const line = twin.centerline();
  ctx.strokeStyle = "#9ab";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  for (let i = 0; i < line.length; i += 2) ctx.lineTo(v.px(line[i]), v.py(line[i + 1]));
  ctx.stroke();
  ctx.setLineDash([]);

  const pts = twin.scan_points();
  ctx.fillStyle = "#e33";
  for (let i = 0; i < pts.length; i += 2) ctx.fillRect(v.px(pts[i]) - 1, v.py(pts[i + 1]) - 1, 2, 2);

  const [x, y, yaw] = twin.pose();
  ctx.save();
  ctx.translate(v.px(x), v.py(y));
  ctx.rotate(-yaw);
  ctx.fillStyle = "#2255cc";
  const len = 0.45 * v.scale;
  const wid = 0.25 * v.scale;
  ctx.fillRect(-len / 2, -wid / 2, len, wid);
  ctx.fillStyle = "#fff";
  ctx.fillRect(len / 4, -wid / 4, len / 5, wid / 2);
  ctx.restore();
}

function readout() {
  const [x, y, yaw, speed, steer, rpm, time, hit] = twin.pose();
  const recall = twin.recall();
  $("readout").textContent = [
    `t      ${time.toFixed(2)} s`,
    `pose   ${x.toFixed(2)}, ${y.toFixed(2)}, ${(yaw * 180 / Math.PI).toFixed(1)}°`,
    `speed  ${speed.toFixed(2)} m/s`,
    `steer  ${(steer * 180 / Math.PI).toFixed(1)}°`,
    `engine ${rpm.toFixed(0)} rpm`,
    `recall ${recall < 0 ? "n/a" : (100 * recall).toFixed(1) + " %"}`,
    hit ? "COLLISION" : "",
  ].join("\n");
}

function loop(now) {
  if (twin) {
    // 1 ms physics ticks, paced to wall-clock time
    const ticks = last ? Math.min(Math.round(now - last), 100) : 0;
    last = now;
    try {
      const [t, s, b] = command();
      twin.step(t, s, b, ticks);
    } catch (e) {
      $("error").textContent = String(e);
      twin = null;
    }
    if (twin) {
      if (frame++ % 15 === 0 && $("mapping").checked) {
        const [w, h] = info;
        mapLayer = paint(twin.map_cells(), w, h, { 0: [235, 248, 235, 255], 100: [20, 20, 20, 255] });
      }
      draw();
      readout();
    }
  }
  requestAnimationFrame(loop);
}

addEventListener("keydown", (e) => {
  const k = e.key.toLowerCase();
  if (["w", "a", "s", "d", " "].includes(k)) {
    keys.add(k);
    e.preventDefault();
  }
});
addEventListener("keyup", (e) => keys.delete(e.key.toLowerCase()));

$("reset").onclick = reset;
$("scene").onchange = reset;
$("vehicle").onchange = reset;
$("mapping").onchange = (e) => twin?.set_mapping(e.target.checked);
$("clear").onclick = () => {
  twin?.clear_map();
  mapLayer = null;
};
$("autopilot").onchange = (e) => {
  try {
    twin?.set_autopilot(e.target.checked);
  } catch (err) {
    $("error").textContent = String(err);
    e.target.checked = false;
  }
};

await init();
reset();
requestAnimationFrame(loop);
