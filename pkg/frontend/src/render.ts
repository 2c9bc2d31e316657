/**
 * DOM rendering for boards, the palette, the accuracy chart, and the turn
 * history.  Board editing: clicking a column's first empty slot drops the
 * selected palette color on top; clicking the top block removes it.  Moves
 * that would break the board (overfull pile, floating block) simply do not
 * exist in this surface.
 */

import { Board, Color, COLORS, MAX_HEIGHT, NUM_PILES } from "./board.js";

export interface TurnView {
  utterance: string;
  correct: boolean;
  accuracy: number;
}

export function renderBoard(
  container: HTMLElement,
  board: Board,
  opts: { editable: boolean; selected?: () => Color; onEdit?: () => void },
): void {
  container.textContent = "";
  container.classList.add("board");
  for (let pile = 0; pile < NUM_PILES; pile++) {
    const column = document.createElement("div");
    column.className = "column";
    column.dataset.pile = String(pile);
    // slots are drawn top-down so the stack grows upward visually
    for (let slot = MAX_HEIGHT - 1; slot >= 0; slot--) {
      const cell = document.createElement("div");
      cell.className = "slot";
      cell.dataset.pile = String(pile);
      cell.dataset.slot = String(slot);
      const color = board.piles[pile][slot];
      const height = board.height(pile);
      if (color !== undefined) {
        cell.classList.add("block", color);
        if (opts.editable && slot === height - 1) {
          cell.classList.add("removable");
          cell.title = "remove this block";
          cell.addEventListener("click", () => {
            board.removeTop(pile);
            renderBoard(container, board, opts);
            opts.onEdit?.();
          });
        }
      } else {
        cell.classList.add("empty");
        if (opts.editable && slot === height) {
          cell.classList.add("droppable");
          cell.title = "add the selected color";
          cell.addEventListener("click", () => {
            const color = opts.selected?.() ?? COLORS[0];
            board.addBlock(pile, color);
            renderBoard(container, board, opts);
            opts.onEdit?.();
          });
        }
      }
      column.appendChild(cell);
    }
    const label = document.createElement("div");
    label.className = "pile-label";
    label.textContent = String(pile + 1);
    column.appendChild(label);
    container.appendChild(column);
  }
}

export function renderPalette(
  container: HTMLElement,
  getSelected: () => Color,
  setSelected: (c: Color) => void,
): void {
  container.textContent = "";
  container.classList.add("palette");
  for (const color of COLORS) {
    const swatch = document.createElement("button");
    swatch.className = `swatch ${color}`;
    swatch.dataset.color = color;
    if (color === getSelected()) swatch.classList.add("selected");
    swatch.addEventListener("click", () => {
      setSelected(color);
      renderPalette(container, getSelected, setSelected);
    });
    container.appendChild(swatch);
  }
}

export function renderChart(svg: SVGSVGElement, accuracies: number[]): void {
  const W = 360;
  const H = 80;
  svg.setAttribute("viewBox", `0 0 ${W} ${H}`);
  svg.textContent = "";
  if (accuracies.length === 0) return;
  const step = accuracies.length > 1 ? W / (accuracies.length - 1) : 0;
  const points = accuracies
    .map((a, i) => `${(i * step).toFixed(1)},${(H - a * (H - 8) - 4).toFixed(1)}`)
    .join(" ");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#2a7");
  line.setAttribute("stroke-width", "2");
  svg.appendChild(line);
  accuracies.forEach((a, i) => {
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", (i * step).toFixed(1));
    dot.setAttribute("cy", (H - a * (H - 8) - 4).toFixed(1));
    dot.setAttribute("r", "2.5");
    dot.setAttribute("fill", "#2a7");
    dot.classList.add("chart-point");
    svg.appendChild(dot);
  });
}

export function renderHistory(container: HTMLElement, turns: TurnView[]): void {
  container.textContent = "";
  for (const turn of [...turns].reverse()) {
    const row = document.createElement("div");
    row.className = `turn ${turn.correct ? "correct" : "incorrect"}`;
    row.textContent = `${turn.correct ? "✓" : "✗"} "${turn.utterance}"` +
      `  (running accuracy ${(turn.accuracy * 100).toFixed(0)}%)`;
    container.appendChild(row);
  }
}
