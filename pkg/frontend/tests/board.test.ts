import { describe, expect, it } from "vitest";

import { Board, COLORS, tokenize, WIRE_LENGTH } from "../src/board.js";

const FIG_TOKENS =
  "BROWN X X # RED X X # ORANGE RED X # X X X # X X X # X X X".split(" ");

describe("wire format", () => {
  it("parses and reserializes the worked example", () => {
    const board = Board.fromTokens(FIG_TOKENS);
    expect(board.piles[0]).toEqual(["brown"]);
    expect(board.piles[2]).toEqual(["orange", "red"]);
    expect(board.piles[3]).toEqual([]);
    expect(board.toTokens()).toEqual(FIG_TOKENS);
  });

  it("round-trips random edited boards", () => {
    let seed = 1234;
    const rand = () => (seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31;
    for (let trial = 0; trial < 50; trial++) {
      const board = Board.empty();
      for (let e = 0; e < 12; e++) {
        const pile = Math.floor(rand() * 6);
        if (rand() < 0.7) {
          board.addBlock(pile, COLORS[Math.floor(rand() * 4)]);
        } else {
          board.removeTop(pile);
        }
      }
      const tokens = board.toTokens();
      expect(tokens).toHaveLength(WIRE_LENGTH);
      expect(Board.fromTokens(tokens).equals(board)).toBe(true);
    }
  });

  it("rejects malformed wire states in strict mode", () => {
    expect(() => Board.fromTokens(Array(22).fill("X"))).toThrow(/23/);
    const floating = [...FIG_TOKENS];
    floating[0] = "X";
    floating[1] = "RED"; // X below a block
    expect(() => Board.fromTokens(floating)).toThrow(/floating/);
    const badDelim = [...FIG_TOKENS];
    badDelim[3] = "X";
    expect(() => Board.fromTokens(badDelim)).toThrow(/#/);
    const unknown = [...FIG_TOKENS];
    unknown[0] = "BLUE";
    expect(() => Board.fromTokens(unknown)).toThrow(/unknown/);
  });

  it("salvages sane boards from raw model predictions in lenient mode", () => {
    const messy = [...FIG_TOKENS];
    messy[0] = "X";
    messy[1] = "RED"; // floating in strict terms
    const board = Board.fromTokens(messy, { lenient: true });
    expect(board.piles[0]).toEqual(["red"]); // compacted downward
    const tokens = board.toTokens();
    expect(() => Board.fromTokens(tokens)).not.toThrow();
  });
});

describe("editing rules", () => {
  it("respects pile capacity", () => {
    const board = Board.empty();
    expect(board.addBlock(0, "red")).toBe(true);
    expect(board.addBlock(0, "cyan")).toBe(true);
    expect(board.addBlock(0, "brown")).toBe(true);
    expect(board.addBlock(0, "orange")).toBe(false);
    expect(board.piles[0]).toEqual(["red", "cyan", "brown"]);
  });

  it("remove on an empty pile is a no-op", () => {
    const board = Board.empty();
    expect(board.removeTop(2)).toBe(false);
    expect(board.piles[2]).toEqual([]);
  });

  it("clone is independent", () => {
    const board = Board.empty();
    board.addBlock(1, "red");
    const copy = board.clone();
    copy.addBlock(1, "cyan");
    expect(board.piles[1]).toEqual(["red"]);
    expect(copy.piles[1]).toEqual(["red", "cyan"]);
  });
});

describe("tokenize", () => {
  it("lowercases and collapses whitespace", () => {
    expect(tokenize("  ADD   red at 1st   tile ")).toEqual(
      ["add", "red", "at", "1st", "tile"],
    );
    expect(tokenize("add red")).toEqual(tokenize("  Add   RED "));
    expect(tokenize("   ")).toEqual([]);
  });
});
