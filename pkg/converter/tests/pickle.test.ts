import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { loads, PickleError, unescapePyString } from "../src/pickle";
import { defaultRegistry } from "../src/numpy";

const FIXTURES = path.join(__dirname, "fixtures", "pickles");
const expected = JSON.parse(
  fs.readFileSync(path.join(FIXTURES, "expected.json"), "utf8"));

function load(name: string) {
  return loads(fs.readFileSync(path.join(FIXTURES, name)), defaultRegistry());
}

/** Maps become plain objects so fixtures can compare via JSON. */
function plain(value: unknown): unknown {
  if (value instanceof Map) {
    const out: Record<string, unknown> = {};
    for (const [k, v] of value) out[String(k)] = plain(v);
    return out;
  }
  if (Array.isArray(value)) return value.map(plain);
  return value;
}

describe("pickle protocols 0-2", () => {
  for (const name of ["basic_p0.pkl", "basic_p1.pkl", "basic_p2.pkl"]) {
    it(`round-trips scalars and containers from ${name}`, () => {
      expect(plain(load(name))).toEqual(expected[name]);
    });
  }

  it("resolves memo references to the same object", () => {
    const value = load("memo_p2.pkl") as unknown[];
    expect(value).toHaveLength(3);
    expect(value[0]).toBe(value[1]);
    const third = value[2] as Map<string, unknown>;
    expect(third.get("again")).toBe(value[0]);
  });

  for (const name of ["defaultdict_p0.pkl", "defaultdict_p2.pkl"]) {
    it(`reconstructs a defaultdict from ${name}`, () => {
      const graph = load(name) as Map<number, number[]>;
      expect(plain(graph)).toEqual(expected[name]);
      expect(typeof [...graph.keys()][0]).toBe("number");
    });
  }
});

describe("malformed input", () => {
  it("rejects a truncated stream", () => {
    const good = fs.readFileSync(path.join(FIXTURES, "basic_p2.pkl"));
    expect(() => loads(good.subarray(0, good.length - 4))).toThrow(PickleError);
  });

  it("rejects an unknown opcode", () => {
    expect(() => loads(Buffer.from([0x80, 0x02, 0xff]))).toThrow(PickleError);
  });

  it("rejects an unset memo slot", () => {
    expect(() => loads(Buffer.from("h\x07.", "latin1"))).toThrow(PickleError);
  });
});

describe("protocol-0 string unescaping", () => {
  it("handles quotes and hex escapes", () => {
    expect(unescapePyString("'a\\x00b'").toString("latin1")).toBe("a\x00b");
    expect(unescapePyString("'\\\\n'").toString("latin1")).toBe("\\n");
    expect(unescapePyString("'\\n\\t'").toString("latin1")).toBe("\n\t");
  });
});
