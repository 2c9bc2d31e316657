/**
 * Board model: 6 piles x 3 slots of colored blocks, mirroring the server's
 * 23-token wire format (6 groups of 3 uppercase slot tokens, X-padded,
 * joined by '#').  All editing goes through addBlock/removeTop so a board
 * can never hold a floating block or exceed capacity.
 */

export const COLORS = ["red", "cyan", "brown", "orange"] as const;
export type Color = (typeof COLORS)[number];
export const NUM_PILES = 6;
export const MAX_HEIGHT = 3;
export const EMPTY_TOKEN = "X";
export const DELIM_TOKEN = "#";
export const WIRE_LENGTH = NUM_PILES * MAX_HEIGHT + (NUM_PILES - 1);

const COLOR_BY_TOKEN = new Map<string, Color>(
  COLORS.map((c) => [c.toUpperCase(), c]),
);

export class Board {
  piles: Color[][];

  constructor(piles?: Color[][]) {
    this.piles = piles ?? Array.from({ length: NUM_PILES }, () => []);
    if (this.piles.length !== NUM_PILES) {
      throw new Error(`expected ${NUM_PILES} piles`);
    }
    for (const pile of this.piles) {
      if (pile.length > MAX_HEIGHT) throw new Error("pile too tall");
    }
  }

  static empty(): Board {
    return new Board();
  }

  /**
   * Parse wire tokens.  Strict mode rejects malformed sequences; lenient
   * mode salvages what it can (used to display raw model predictions,
   * which are token sequences and not guaranteed to be valid boards).
   */
  static fromTokens(tokens: string[], opts?: { lenient?: boolean }): Board {
    const lenient = opts?.lenient ?? false;
    if (!lenient) {
      if (tokens.length !== WIRE_LENGTH) {
        throw new Error(`expected ${WIRE_LENGTH} tokens, got ${tokens.length}`);
      }
      const piles: Color[][] = [];
      for (let g = 0; g < NUM_PILES; g++) {
        const base = g * (MAX_HEIGHT + 1);
        if (g > 0 && tokens[base - 1] !== DELIM_TOKEN) {
          throw new Error(`expected '${DELIM_TOKEN}' before group ${g + 1}`);
        }
        const pile: Color[] = [];
        let sawEmpty = false;
        for (const tok of tokens.slice(base, base + MAX_HEIGHT)) {
          if (tok === EMPTY_TOKEN) {
            sawEmpty = true;
          } else {
            const color = COLOR_BY_TOKEN.get(tok);
            if (color === undefined) throw new Error(`unknown token ${tok}`);
            if (sawEmpty) throw new Error("floating block");
            pile.push(color);
          }
        }
        piles.push(pile);
      }
      return new Board(piles);
    }
    // lenient: split on delimiters if present, else chunk; keep colors in order
    const groups: string[][] = [];
    if (tokens.includes(DELIM_TOKEN)) {
      let current: string[] = [];
      for (const tok of tokens) {
        if (tok === DELIM_TOKEN) {
          groups.push(current);
          current = [];
        } else {
          current.push(tok);
        }
      }
      groups.push(current);
    } else {
      for (let g = 0; g < NUM_PILES; g++) {
        groups.push(tokens.slice(g * MAX_HEIGHT, (g + 1) * MAX_HEIGHT));
      }
    }
    const piles: Color[][] = [];
    for (let g = 0; g < NUM_PILES; g++) {
      const pile: Color[] = [];
      for (const tok of groups[g] ?? []) {
        const color = COLOR_BY_TOKEN.get(tok);
        if (color !== undefined && pile.length < MAX_HEIGHT) pile.push(color);
      }
      piles.push(pile);
    }
    return new Board(piles);
  }

  toTokens(): string[] {
    const tokens: string[] = [];
    this.piles.forEach((pile, i) => {
      if (i > 0) tokens.push(DELIM_TOKEN);
      for (const color of pile) tokens.push(color.toUpperCase());
      for (let s = pile.length; s < MAX_HEIGHT; s++) tokens.push(EMPTY_TOKEN);
    });
    return tokens;
  }

  clone(): Board {
    return new Board(this.piles.map((p) => [...p]));
  }

  equals(other: Board): boolean {
    return this.toTokens().join(" ") === other.toTokens().join(" ");
  }

  height(pile: number): number {
    return this.piles[pile].length;
  }

  /** Push a block; returns false (board unchanged) when the pile is full. */
  addBlock(pile: number, color: Color): boolean {
    if (this.piles[pile].length >= MAX_HEIGHT) return false;
    this.piles[pile].push(color);
    return true;
  }

  /** Pop the top block; returns false (board unchanged) when empty. */
  removeTop(pile: number): boolean {
    if (this.piles[pile].length === 0) return false;
    this.piles[pile].pop();
    return true;
  }
}

/** Lowercase whitespace tokenization used for typed instructions. */
export function tokenize(text: string): string[] {
  return text.trim().toLowerCase().split(/\s+/).filter((t) => t.length > 0);
}
