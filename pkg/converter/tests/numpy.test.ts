import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { loads } from "../src/pickle";
import { csrToDense, defaultRegistry, NDArray, toCSR } from "../src/numpy";

const FIXTURES = path.join(__dirname, "fixtures", "pickles");
const expected = JSON.parse(
  fs.readFileSync(path.join(FIXTURES, "expected.json"), "utf8"));

function load(name: string) {
  return loads(fs.readFileSync(path.join(FIXTURES, name)), defaultRegistry());
}

describe("ndarray reconstruction", () => {
  for (const name of ["arrays_p0.pkl", "arrays_p2.pkl"]) {
    it(`decodes every dtype from ${name}`, () => {
      const arrays = load(name) as Map<string, NDArray>;
      for (const [key, want] of Object.entries(expected[name]) as
           Array<[string, { shape: number[]; values: number[] }]>) {
        const got = arrays.get(key);
        expect(got, key).toBeInstanceOf(NDArray);
        expect(got!.shape, key).toEqual(want.shape);
        expect(got!.values(), key).toEqual(want.values);
      }
    });
  }

  it("widens float32 exactly", () => {
    const arrays = load("arrays_p2.pkl") as Map<string, NDArray>;
    const values = arrays.get("f4_1d")!.values();
    // float64 image of float32(0.1), not 0.1 itself
    expect(values[0]).toBe(0.10000000149011612);
    expect(values[0]).not.toBe(0.1);
  });

  it("indexes 2-d arrays in row-major order", () => {
    const arrays = load("arrays_p2.pkl") as Map<string, NDArray>;
    const a = arrays.get("f8_2x3")!;
    expect(a.at(0, 2)).toBe(0.5);
    expect(a.at(1, 0)).toBe(0.75);
    expect(() => a.at(2, 0)).toThrow();
  });
});

describe("csr reconstruction", () => {
  for (const name of ["csr_p0.pkl", "csr_p2.pkl"]) {
    it(`recovers the dense matrix from ${name}`, () => {
      const matrix = toCSR(load(name));
      expect(matrix.rows).toBe(expected[name].shape[0]);
      expect(matrix.cols).toBe(expected[name].shape[1]);
      expect(csrToDense(matrix)).toEqual(expected[name].dense);
    });
  }

  it("rejects objects without CSR fields", () => {
    expect(() => toCSR(new Map())).toThrow();
  });
});
