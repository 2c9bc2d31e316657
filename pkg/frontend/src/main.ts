import { App } from "./app.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

window.addEventListener("DOMContentLoaded", () => {
  new App({
    serverUrl: el<HTMLInputElement>("server-url"),
    newSession: el<HTMLButtonElement>("new-session"),
    sessionLabel: el("session-label"),
    palette: el("palette"),
    startBoard: el("start-board"),
    predictedBoard: el("predicted-board"),
    predictedPanel: el("predicted-panel"),
    instruction: el<HTMLInputElement>("instruction"),
    submitInstruction: el<HTMLButtonElement>("submit-instruction"),
    submitFeedback: el<HTMLButtonElement>("submit-feedback"),
    acceptPrediction: el<HTMLButtonElement>("accept-prediction"),
    status: el("status"),
    accuracyLabel: el("accuracy-label"),
    chart: document.getElementById("chart") as unknown as SVGSVGElement,
    history: el("history"),
    configInputs: {
      k: el<HTMLInputElement>("cfg-k"),
      steps: el<HTMLInputElement>("cfg-steps"),
      lr: el<HTMLInputElement>("cfg-lr"),
      seed: el<HTMLInputElement>("cfg-seed"),
      reuse: el<HTMLInputElement>("cfg-reuse"),
      adapt: el<HTMLInputElement>("cfg-adapt"),
    },
  });
});
