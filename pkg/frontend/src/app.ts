/**
 * Controller for the live teaching page.
 *
 * Loop per turn: type an instruction over the current board -> the server
 * predicts the resulting board -> fix the prediction by clicking blocks ->
 * submit the corrected board as feedback.  The corrected board becomes the
 * next turn's start.  Accuracy always comes back from the server.
 */

import { Board, Color, COLORS, tokenize } from "./board.js";
import { ApiError, SessionClient, SessionConfig } from "./client.js";
import {
  renderBoard,
  renderChart,
  renderHistory,
  renderPalette,
  TurnView,
} from "./render.js";

interface Elements {
  serverUrl: HTMLInputElement;
  newSession: HTMLButtonElement;
  sessionLabel: HTMLElement;
  palette: HTMLElement;
  startBoard: HTMLElement;
  predictedBoard: HTMLElement;
  predictedPanel: HTMLElement;
  instruction: HTMLInputElement;
  submitInstruction: HTMLButtonElement;
  submitFeedback: HTMLButtonElement;
  acceptPrediction: HTMLButtonElement;
  status: HTMLElement;
  accuracyLabel: HTMLElement;
  chart: SVGSVGElement;
  history: HTMLElement;
  configInputs: Record<string, HTMLInputElement | HTMLSelectElement>;
}

type Phase = "no-session" | "composing" | "correcting";

export class App {
  client: SessionClient;
  sessionId: string | null = null;
  phase: Phase = "no-session";
  startBoard = Board.empty();
  predictedBoard = Board.empty();
  selectedColor: Color = COLORS[0];
  turns: TurnView[] = [];
  pendingUtterance = "";

  constructor(private el: Elements) {
    this.client = new SessionClient(el.serverUrl.value);
    el.newSession.addEventListener("click", () => void this.newSession());
    el.submitInstruction.addEventListener("click", () => void this.submit());
    el.submitFeedback.addEventListener("click", () => void this.feedback(false));
    el.acceptPrediction.addEventListener("click", () => void this.feedback(true));
    el.instruction.addEventListener("input", () => this.refreshControls());
    el.instruction.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && !el.submitInstruction.disabled) {
        void this.submit();
      }
    });
    this.redraw();
  }

  private config(): SessionConfig {
    const cfg: SessionConfig = {};
    for (const [key, input] of Object.entries(this.el.configInputs)) {
      const raw = input.value;
      if (raw === "") continue;
      (cfg as Record<string, unknown>)[key] =
        input instanceof HTMLSelectElement || isNaN(Number(raw))
          ? raw
          : Number(raw);
    }
    return cfg;
  }

  async newSession(): Promise<void> {
    this.client = new SessionClient(this.el.serverUrl.value);
    try {
      if (this.sessionId) {
        await this.client.remove(this.sessionId).catch(() => undefined);
      }
      const created = await this.client.createSession(this.config());
      this.sessionId = created.id;
      this.turns = [];
      this.phase = "composing";
      this.startBoard = Board.empty();
      this.setStatus(`session ${created.id.slice(0, 8)} ready; build a ` +
        `board, then type an instruction`);
      this.el.sessionLabel.textContent = created.id.slice(0, 8);
    } catch (err) {
      this.fail(err);
    }
    this.redraw();
  }

  async submit(): Promise<void> {
    if (!this.sessionId || this.phase !== "composing") return;
    const utt = tokenize(this.el.instruction.value);
    if (utt.length === 0) return;
    try {
      const res = await this.client.predict(
        this.sessionId, utt, this.startBoard.toTokens());
      this.pendingUtterance = utt.join(" ");
      this.predictedBoard = Board.fromTokens(res.predicted, { lenient: true });
      this.phase = "correcting";
      this.setStatus(`copy ${res.selected_model} predicts this outcome; ` +
        `fix it if needed, then send feedback`);
    } catch (err) {
      this.fail(err);
    }
    this.redraw();
  }

  async feedback(_acceptAsIs: boolean): Promise<void> {
    if (!this.sessionId || this.phase !== "correcting") return;
    // the predicted board doubles as the correction surface: accepting just
    // means submitting it unedited
    const target = this.predictedBoard;
    try {
      const res = await this.client.feedback(this.sessionId, target.toTokens());
      this.turns.push({
        utterance: this.pendingUtterance,
        correct: res.correct,
        accuracy: res.online_accuracy,
      });
      this.startBoard = target.clone();
      this.phase = "composing";
      this.el.instruction.value = "";
      this.setStatus(res.correct
        ? "the model got it right"
        : "corrected; the model just trained on your feedback");
    } catch (err) {
      this.fail(err);
    }
    this.redraw();
  }

  private fail(err: unknown): void {
    const message = err instanceof ApiError ? err.message : String(err);
    this.setStatus(`error: ${message}`);
    if (err instanceof ApiError && err.status === 404) {
      this.phase = "no-session";
      this.sessionId = null;
    }
  }

  private setStatus(text: string): void {
    this.el.status.textContent = text;
  }

  refreshControls(): void {
    const composing = this.phase === "composing";
    this.el.submitInstruction.disabled =
      !composing || tokenize(this.el.instruction.value).length === 0;
    this.el.instruction.disabled = !composing;
    this.el.submitFeedback.disabled = this.phase !== "correcting";
    this.el.acceptPrediction.disabled = this.phase !== "correcting";
  }

  redraw(): void {
    renderPalette(this.el.palette, () => this.selectedColor, (c) => {
      this.selectedColor = c;
    });
    renderBoard(this.el.startBoard, this.startBoard, {
      editable: this.phase === "composing",
      selected: () => this.selectedColor,
    });
    this.el.predictedPanel.style.display =
      this.phase === "correcting" ? "" : "none";
    renderBoard(this.el.predictedBoard, this.predictedBoard, {
      editable: this.phase === "correcting",
      selected: () => this.selectedColor,
    });
    const accs = this.turns.map((t) => t.accuracy);
    renderChart(this.el.chart, accs);
    this.el.accuracyLabel.textContent = this.turns.length
      ? `${(accs[accs.length - 1] * 100).toFixed(1)}% over ${this.turns.length} turns`
      : "no turns yet";
    renderHistory(this.el.history, this.turns);
    this.refreshControls();
  }
}
