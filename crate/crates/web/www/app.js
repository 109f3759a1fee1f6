import init, { render, parse, bbox } from "./pkg/toolchat_web.js";

const SAMPLE = {
  system: "You are a helpful assistant.",
  functions: [{
    name: "get_weather",
    description: "Current weather for a city",
    parameters: {
      type: "object",
      properties: { city: { type: "string", description: "City name" } },
      required: ["city"],
    },
  }],
  turns: [
    { role: "user", content: "Weather in Taipei?" },
    { role: "assistant", decision: "use_tool", calls: [{ name: "get_weather", arguments: { city: "Taipei" } }] },
    { role: "ipython", responses: [{ temp_c: 31, sky: "sunny" }] },
    { role: "assistant", decision: "answer", content: "It is 31°C and sunny in Taipei." },
  ],
};

const $ = (id) => document.getElementById(id);

function show(id, f) {
  const out = $(id);
  try {
    out.textContent = f();
    out.className = "";
  } catch (e) {
    out.textContent = String(e);
    out.className = "error";
  }
}

const num = (id) => Number($(id).value);

await init();
$("status").textContent = "Ready.";
$("conv").value = JSON.stringify(SAMPLE, null, 2);

$("render-btn").onclick = () => show("render-out", () => render($("conv").value, $("gen-header").checked));
$("parse-btn").onclick = () => show("parse-out", () => parse($("raw").value, $("has-functions").checked));
$("bbox-btn").onclick = () =>
  show("bbox-out", () => {
    const r = JSON.parse(bbox(num("x1"), num("y1"), num("x2"), num("y2"), num("w"), num("h")));
    return `${JSON.stringify(r.grid)}\n${r.text}`;
  });
