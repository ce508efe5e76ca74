/**
 * Loading and assembly of the canonical eight-file citation-dataset
 * distribution (ind.<name>.x/y/tx/ty/allx/ally/graph/test.index).
 *
 * Layout recap: allx rows are graph nodes [0, allxRows); the test rows in
 * tx belong to the node ids listed in test.index (file order). Node count
 * is allxRows plus the span of the test-id range; ids inside the span but
 * absent from test.index are isolated nodes with zero features and no
 * label (a known quirk of the citeseer distribution). Train nodes are the
 * first yRows ids, validation the next 500 (capped by the remaining
 * non-test pool), test the sorted listed ids.
 */

import * as fs from "fs";
import * as path from "path";

import { loads, PyValue } from "./pickle";
import { CSRMatrix, csrRow, defaultRegistry, NDArray, toCSR } from "./numpy";

export class ConvertError extends Error {}

export const DATASET_NAMES = ["cora", "citeseer", "pubmed"] as const;
export type DatasetName = (typeof DATASET_NAMES)[number];

export interface RawPlanetoid {
  x: CSRMatrix;
  y: NDArray;
  tx: CSRMatrix;
  ty: NDArray;
  allx: CSRMatrix;
  ally: NDArray;
  graph: Map<number, number[]>;
  testIndex: number[];
}

export interface AssembledDataset {
  name: string;
  numNodes: number;
  featureDim: number;
  numClasses: number;
  /** sorted (node, dim, value) triplets, zeros omitted */
  features: Array<[number, number, number]>;
  /** class id per node, -1 when unlabeled */
  labels: number[];
  trainIds: number[];
  valIds: number[];
  testIds: number[];
  /** sorted u < v pairs, deduplicated, self-loops removed */
  edges: Array<[number, number]>;
  directedEntries: number;
  sourceSelfLoops: number;
  isolatedTestNodes: number;
}

function readPickle(dir: string, name: string, part: string): PyValue {
  const file = path.join(dir, `ind.${name}.${part}`);
  if (!fs.existsSync(file)) {
    throw new ConvertError(`missing input file ${file}`);
  }
  return loads(fs.readFileSync(file), defaultRegistry());
}

export function loadRaw(dir: string, name: string): RawPlanetoid {
  const x = toCSR(readPickle(dir, name, "x"));
  const y = readPickle(dir, name, "y");
  const tx = toCSR(readPickle(dir, name, "tx"));
  const ty = readPickle(dir, name, "ty");
  const allx = toCSR(readPickle(dir, name, "allx"));
  const ally = readPickle(dir, name, "ally");
  const graphRaw = readPickle(dir, name, "graph");
  if (!(y instanceof NDArray) || !(ty instanceof NDArray)
      || !(ally instanceof NDArray)) {
    throw new ConvertError("label files did not decode to arrays");
  }
  if (!(graphRaw instanceof Map)) {
    throw new ConvertError("graph file did not decode to an adjacency dict");
  }
  const graph = new Map<number, number[]>();
  for (const [k, v] of graphRaw) {
    if (typeof k !== "number" || !Array.isArray(v)) {
      throw new ConvertError("adjacency dict has a non-numeric entry");
    }
    graph.set(k, v.map((n) => Number(n)));
  }

  const indexFile = path.join(dir, `ind.${name}.test.index`);
  if (!fs.existsSync(indexFile)) {
    throw new ConvertError(`missing input file ${indexFile}`);
  }
  const testIndex = fs.readFileSync(indexFile, "utf8")
    .split(/\s+/)
    .filter((line) => line.length > 0)
    .map((line) => {
      const v = parseInt(line, 10);
      if (!Number.isFinite(v)) {
        throw new ConvertError(`bad test index line ${JSON.stringify(line)}`);
      }
      return v;
    });
  return { x, y, tx, ty, allx, ally, graph, testIndex };
}

function oneHotLabel(arr: NDArray, row: number): number {
  const [, classes] = arr.shape;
  let label = -1;
  for (let c = 0; c < classes; c++) {
    if (arr.at(row, c) !== 0) {
      if (label >= 0) {
        throw new ConvertError(`label row ${row} is not one-hot`);
      }
      label = c;
    }
  }
  return label;
}

export function assemble(name: string, raw: RawPlanetoid): AssembledDataset {
  const { x, y, tx, ty, allx, ally, graph, testIndex } = raw;
  const allxRows = allx.rows;
  const featureDim = allx.cols;
  if (x.cols !== featureDim || tx.cols !== featureDim) {
    throw new ConvertError(
      `feature widths disagree: x=${x.cols} tx=${tx.cols} allx=${featureDim}`);
  }
  const numClasses = ally.shape[1];
  if (y.shape[1] !== numClasses || ty.shape[1] !== numClasses) {
    throw new ConvertError("label widths disagree across files");
  }
  if (x.rows !== y.shape[0] || tx.rows !== ty.shape[0]
      || allx.rows !== ally.shape[0]) {
    throw new ConvertError("feature/label row counts disagree");
  }
  if (testIndex.length === 0) {
    throw new ConvertError("test.index is empty");
  }
  if (testIndex.length !== tx.rows) {
    throw new ConvertError(
      `test.index lists ${testIndex.length} nodes but tx has ${tx.rows} rows`);
  }

  const minTest = Math.min(...testIndex);
  const maxTest = Math.max(...testIndex);
  if (minTest !== allxRows) {
    throw new ConvertError(
      `test ids start at ${minTest}, expected ${allxRows} (end of allx)`);
  }
  const numNodes = maxTest + 1;
  if (graph.size !== numNodes) {
    throw new ConvertError(
      `adjacency dict covers ${graph.size} nodes but the feature files ` +
      `imply ${numNodes}; a test index is out of range or the graph is truncated`);
  }
  const isolatedTestNodes = (maxTest - minTest + 1) - testIndex.length;

  // node id -> row of tx, in the file order of test.index
  const txRowOf = new Map<number, number>();
  testIndex.forEach((node, k) => {
    if (node < minTest || node > maxTest) {
      throw new ConvertError(`test index ${node} out of range`);
    }
    if (txRowOf.has(node)) {
      throw new ConvertError(`test index ${node} listed twice`);
    }
    txRowOf.set(node, k);
  });

  const features: Array<[number, number, number]> = [];
  const labels = new Array<number>(numNodes).fill(-1);
  for (let node = 0; node < allxRows; node++) {
    for (const [dim, value] of csrRow(allx, node)) {
      if (value !== 0) features.push([node, dim, value]);
    }
    labels[node] = oneHotLabel(ally, node);
  }
  for (const [node, k] of txRowOf) {
    for (const [dim, value] of csrRow(tx, k)) {
      if (value !== 0) features.push([node, dim, value]);
    }
    labels[node] = oneHotLabel(ty, k);
  }
  features.sort((a, b) => a[0] - b[0] || a[1] - b[1]);

  let directedEntries = 0;
  let sourceSelfLoops = 0;
  const edgeSet = new Set<number>();
  for (const [u, neighbors] of graph) {
    if (u < 0 || u >= numNodes) {
      throw new ConvertError(`adjacency node ${u} out of range [0, ${numNodes})`);
    }
    for (const v of neighbors) {
      if (v < 0 || v >= numNodes) {
        throw new ConvertError(`adjacency neighbor ${v} out of range`);
      }
      directedEntries++;
      if (u === v) {
        sourceSelfLoops++;
        continue;
      }
      const lo = Math.min(u, v);
      const hi = Math.max(u, v);
      edgeSet.add(lo * numNodes + hi);
    }
  }
  const edges = [...edgeSet].sort((a, b) => a - b).map(
    (key) => [Math.floor(key / numNodes), key % numNodes] as [number, number]);

  const trainIds = rangeArray(0, y.shape[0]);
  const valCount = Math.min(500, allxRows - y.shape[0]);
  const valIds = rangeArray(y.shape[0], y.shape[0] + valCount);
  const testIds = [...testIndex].sort((a, b) => a - b);

  for (const node of [...trainIds, ...valIds, ...testIds]) {
    if (labels[node] < 0) {
      throw new ConvertError(`split node ${node} has no label`);
    }
  }

  return {
    name,
    numNodes,
    featureDim,
    numClasses,
    features,
    labels,
    trainIds,
    valIds,
    testIds,
    edges,
    directedEntries,
    sourceSelfLoops,
    isolatedTestNodes,
  };
}

function rangeArray(lo: number, hi: number): number[] {
  return Array.from({ length: hi - lo }, (_, i) => lo + i);
}

export function convertDirectory(dir: string, name: string): AssembledDataset {
  return assemble(name, loadRaw(dir, name));
}
