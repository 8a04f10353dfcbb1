import init, { analyze_tone, griffin_lim_demo, signed_rank } from "./pkg/pathovc_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const span = hi - lo || 1;
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, i) => {
      const x = (i / Math.max(1, s.values.length - 1)) * (w - 10) + 5;
      const y = h - 5 - ((v - lo) / span) * (h - 10);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  }
}

function tone() {
  $("order-v").textContent = $("order").value;
  try {
    const r = JSON.parse(analyze_tone(+$("f0").value, +$("harm").value, +$("order").value));
    plot($("mel"), [
      { values: r.log_mel, color: "#999" },
      { values: r.smoothed_log_mel, color: "#1f5fbf" },
    ]);
  } catch (e) {
    plot($("mel"), []);
    console.warn(e);
  }
}

function griffin() {
  try {
    const r = JSON.parse(griffin_lim_demo(+$("gl-f").value, +$("gl-n").value));
    plot($("gl"), [{ values: r.spectral_convergence, color: "#bf3f1f" }]);
    const sc = r.spectral_convergence;
    $("gl-out").textContent =
      `peak ${r.input_peak_hz.toFixed(1)} Hz -> ${r.output_peak_hz.toFixed(1)} Hz\n` +
      `spectral convergence ${sc[0].toFixed(3)} -> ${sc[sc.length - 1].toFixed(3)}`;
  } catch (e) {
    $("gl-out").textContent = String(e);
  }
}

function wilcoxon() {
  try {
    const r = JSON.parse(signed_rank($("wa").value, $("wb").value));
    $("w-out").textContent = r.method === "no_test"
      ? "every paired difference is zero, no test"
      : `n = ${r.n} (${r.zeros_dropped} zero differences dropped)\n` +
        `W+ = ${r.w_plus}  W- = ${r.w_minus}  W = ${r.w}\n` +
        `p = ${r.p.toPrecision(4)} (${r.method})`;
  } catch (e) {
    $("w-out").textContent = String(e);
  }
}

await init();
for (const id of ["f0", "harm", "order"]) $(id).addEventListener("input", tone);
$("gl-run").addEventListener("click", griffin);
$("w-run").addEventListener("click", wilcoxon);
tone();
wilcoxon();
