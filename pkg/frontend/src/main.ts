// Operator console wiring. One active session at a time, mirroring the
// gateway; every number on screen is a gateway response value.

import { GatewayClient, PatientsView, PatientView, ResultView } from "./api.js";
import { drawAudiogram, drawBpTrace } from "./charts.js";
import { SessionView } from "./session.js";

const client = new GatewayClient("");
const session = new SessionView(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const patientSelect = el<HTMLSelectElement>("patient-select");
const testSelect = el<HTMLSelectElement>("test-select");
const startBtn = el<HTMLButtonElement>("start-btn");
const stopBtn = el<HTMLButtonElement>("stop-btn");
const banner = el<HTMLDivElement>("banner");
const phaseLabel = el<HTMLSpanElement>("phase-label");
const resultCard = el<HTMLDivElement>("result-card");
const historyPanel = el<HTMLDivElement>("history-panel");

const bpPanel = el<HTMLDivElement>("bp-panel");
const bpCanvas = el<HTMLCanvasElement>("bp-canvas");

const hearingPanel = el<HTMLDivElement>("hearing-panel");
const hearingPrompt = el<HTMLDivElement>("hearing-prompt");
const heardBtn = el<HTMLButtonElement>("heard-btn");
const notHeardBtn = el<HTMLButtonElement>("not-heard-btn");
const audiogramCanvas = el<HTMLCanvasElement>("audiogram-canvas");

const eyePanel = el<HTMLDivElement>("eye-panel");
const potSlider = el<HTMLInputElement>("pot-slider");
const eyeReadout = el<HTMLDivElement>("eye-readout");
const recordEyeBtn = el<HTMLButtonElement>("record-eye-btn");

const heightPanel = el<HTMLDivElement>("height-panel");
const heightFile = el<HTMLInputElement>("height-file");
const heightCanvas = el<HTMLCanvasElement>("height-canvas");
const heightStatus = el<HTMLDivElement>("height-status");
const rulerLenInput = el<HTMLInputElement>("ruler-len");

const tempPanel = el<HTMLDivElement>("simple-panel");
const trueValueInput = el<HTMLInputElement>("true-value");

let patients: PatientView[] = [];
let heightPoints: Array<[number, number]> = [];

session.onBanner((text) => {
  banner.textContent = text;
  banner.style.display = text ? "block" : "none";
});

session.onUpdate(() => {
  phaseLabel.textContent = session.phase;
  if (session.test === "blood_pressure") {
    drawBpTrace(bpCanvas, session.events);
  }
  renderResult(session.view);
});

function renderResult(view: ResultView): void {
  if (view.phase === "error") {
    resultCard.className = "card error";
    resultCard.textContent = `error: ${view.error}`;
    return;
  }
  if (view.phase !== "done" || !view.result) {
    resultCard.className = "card";
    resultCard.textContent = view.phase === "idle" ? "no session yet" : "session in progress";
    return;
  }
  resultCard.className = "card done";
  const rows = Object.entries(view.result)
    .filter(([key]) => key !== "audiogram")
    .map(([key, value]) => `<tr><td>${key}</td><td>${formatValue(value)}</td></tr>`)
    .join("");
  const suggestions = (view.suggestions ?? [])
    .map((s) => `<div class="suggestion">${s}</div>`)
    .join("");
  resultCard.innerHTML =
    `<div class="record-id">${view.record_id ?? ""}</div>` +
    (rows ? `<table>${rows}</table>` : "") +
    suggestions;
  const gram = view.result.audiogram as Record<string, number | null> | undefined;
  if (gram) {
    drawAudiogram(audiogramCanvas, gram);
  }
}

function formatValue(value: unknown): string {
  return typeof value === "number" ? value.toFixed(3) : String(value);
}

function showPanels(test: string): void {
  bpPanel.style.display = test === "blood_pressure" ? "block" : "none";
  hearingPanel.style.display = test === "hearing" ? "block" : "none";
  eyePanel.style.display = test === "eye_power" ? "block" : "none";
  heightPanel.style.display = test === "height" ? "block" : "none";
  tempPanel.style.display = test === "temperature" || test === "weight" ? "block" : "none";
}

async function loadPatients(): Promise<void> {
  const view: PatientsView = await client.patients();
  patients = view.patients;
  patientSelect.innerHTML = patients
    .map((p) => `<option value="${p.patient_id}">${p.name} (${p.patient_id})</option>`)
    .join("");
  renderHistory();
}

function renderHistory(): void {
  const patient = patients.find((p) => p.patient_id === patientSelect.value);
  if (!patient) {
    historyPanel.textContent = "";
    return;
  }
  const flag = patient.weight_flag
    ? `<div class="flag">weight decline: ${(patient.weight_flag.severity * 100).toFixed(1)}%</div>`
    : "";
  const rows = patient.history
    .map(
      (h) =>
        `<tr><td>${h.taken_at}</td><td>${h.kind}</td>` +
        `<td>${JSON.stringify(h.payload)}</td></tr>`,
    )
    .join("");
  historyPanel.innerHTML = `${flag}<table>${rows}</table>`;
}

function startParams(test: string): Record<string, unknown> | undefined {
  if (test === "temperature") {
    return { true_temp_c: Number(trueValueInput.value) || 36.8 };
  }
  if (test === "weight") {
    return { true_weight_kg: Number(trueValueInput.value) || 70 };
  }
  if (test === "height") {
    if (heightPoints.length !== 4) {
      banner.textContent = "mark ruler top, ruler bottom, head, foot first";
      banner.style.display = "block";
      return undefined;
    }
    return {
      ruler_top: heightPoints[0],
      ruler_bottom: heightPoints[1],
      head: heightPoints[2],
      foot: heightPoints[3],
      ruler_len: Number(rulerLenInput.value) || 0.5,
    };
  }
  return undefined; // gateway scenario defaults drive the emulated patient
}

startBtn.addEventListener("click", () => {
  const test = testSelect.value;
  if (test === "height" && heightPoints.length !== 4) {
    startParams(test);
    return;
  }
  void session.start(patientSelect.value, test, startParams(test)).then(async (view) => {
    if (view && (view.phase === "running" || view.phase === "awaiting-response")) {
      if (test === "hearing") {
        await session.refresh();
        hearingPrompt.textContent = "presenting tone: 250 Hz at -5 dB HL";
      }
      if (test === "blood_pressure") {
        await session.waitForCompletion(200);
        void loadPatients();
      }
    } else if (view) {
      void loadPatients();
    }
  });
});

stopBtn.addEventListener("click", () => {
  void session.stop().then(() => loadPatients());
});

heardBtn.addEventListener("click", () => void hearingClick(true));
notHeardBtn.addEventListener("click", () => void hearingClick(false));

async function hearingClick(heard: boolean): Promise<void> {
  const out = await session.clickHeard(heard);
  if (out && "freq_hz" in out && !("phase" in out)) {
    hearingPrompt.textContent = `presenting tone: ${out.freq_hz} Hz at ${out.level_db} dB HL`;
  } else if (out) {
    hearingPrompt.textContent = "sweep finished";
    void loadPatients();
  }
}

potSlider.addEventListener("input", () => {
  void session.movePot(Number(potSlider.value)).then((reading) => {
    if (reading) {
      eyeReadout.textContent =
        `${reading.power_d.toFixed(2)} D at ${(reading.distance_m * 100).toFixed(2)} cm ` +
        `(code ${reading.code})`;
    }
  });
});

recordEyeBtn.addEventListener("click", () => {
  void session.stop().then(() => loadPatients());
});

heightFile.addEventListener("change", () => {
  const file = heightFile.files?.[0];
  if (!file) {
    return;
  }
  const img = new Image();
  img.onload = () => {
    heightCanvas.width = img.width;
    heightCanvas.height = img.height;
    heightCanvas.getContext("2d")?.drawImage(img, 0, 0);
    heightPoints = [];
    heightStatus.textContent = "click: ruler top, ruler bottom, head, foot";
  };
  img.src = URL.createObjectURL(file);
});

heightCanvas.addEventListener("click", (ev) => {
  if (heightPoints.length >= 4) {
    return;
  }
  const rect = heightCanvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * heightCanvas.width;
  const y = ((ev.clientY - rect.top) / rect.height) * heightCanvas.height;
  heightPoints.push([x, y]);
  const ctx = heightCanvas.getContext("2d");
  if (ctx) {
    ctx.fillStyle = "#c33";
    ctx.beginPath();
    ctx.arc(x, y, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  const labels = ["ruler top", "ruler bottom", "head", "foot"];
  heightStatus.textContent =
    heightPoints.length === 4
      ? "all four points marked; press Start"
      : `click: ${labels[heightPoints.length]}`;
});

patientSelect.addEventListener("change", renderHistory);
testSelect.addEventListener("change", () => showPanels(testSelect.value));

showPanels(testSelect.value);
void loadPatients();
