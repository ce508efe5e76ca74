/**
 * Reconstruction handlers for the numeric objects inside the dataset
 * pickles: numpy ndarrays and dtypes, numpy scalars, scipy CSR matrices,
 * and collections.defaultdict. Arrays decode their raw little/big-endian
 * buffers into plain JS number arrays on demand.
 */

import {
  asKeyString,
  ClassHandler,
  PickleError,
  PyGlobal,
  PyObject,
  PyValue,
  Registry,
} from "./pickle";

export class DType {
  byteorder: string;

  constructor(readonly code: string, byteorder = "=") {
    this.byteorder = byteorder;
  }

  /** 'f8' -> kind 'f', itemsize 8 */
  get kind(): string {
    return this.code[0];
  }

  get itemsize(): number {
    const size = parseInt(this.code.slice(1), 10);
    if (!Number.isFinite(size)) {
      throw new PickleError(`cannot size dtype ${this.code}`);
    }
    return size;
  }

  get littleEndian(): boolean {
    // '=' is native; every producer of these files is little-endian
    return this.byteorder !== ">";
  }

  __pickle_setstate__(state: PyValue): void {
    if (Array.isArray(state) && state.length >= 2) {
      this.byteorder = String(asKeyString(state[1] as PyValue));
    }
  }
}

export class NDArray {
  shape: number[] = [];
  dtype: DType = new DType("f8");
  fortran = false;
  raw: Buffer = Buffer.alloc(0);
  objects: PyValue[] | null = null;

  __pickle_setstate__(state: PyValue): void {
    if (!Array.isArray(state) || state.length < 5) {
      throw new PickleError("unexpected ndarray state");
    }
    const [, shape, dtype, fortran, data] = state as [
      PyValue, PyValue[], PyValue, PyValue, PyValue,
    ];
    this.shape = (shape as PyValue[]).map((d) => Number(d));
    if (!(dtype instanceof DType)) {
      throw new PickleError("ndarray state carries no dtype");
    }
    this.dtype = dtype;
    this.fortran = Boolean(fortran);
    if (Buffer.isBuffer(data)) {
      this.raw = data;
    } else if (Array.isArray(data)) {
      this.objects = data;  // object arrays pickle as a list
    } else {
      throw new PickleError("ndarray data is neither bytes nor a list");
    }
  }

  get size(): number {
    return this.shape.reduce((a, b) => a * b, 1);
  }

  /** Flat values in C (row-major) order. */
  values(): number[] {
    if (this.objects) {
      return this.objects.map((v) => Number(v));
    }
    const n = this.size;
    const flat = decodeBuffer(this.raw, this.dtype, n);
    if (!this.fortran || this.shape.length <= 1) return flat;
    if (this.shape.length !== 2) {
      throw new PickleError("fortran order only handled for 2-d arrays");
    }
    const [rows, cols] = this.shape;
    const out = new Array<number>(n);
    for (let i = 0; i < rows; i++) {
      for (let j = 0; j < cols; j++) {
        out[i * cols + j] = flat[j * rows + i];
      }
    }
    return out;
  }

  /** Value at (i, j) of a 2-d array. */
  at(i: number, j: number): number {
    const [rows, cols] = this.shape;
    if (i < 0 || i >= rows || j < 0 || j >= cols) {
      throw new PickleError(`index (${i}, ${j}) outside ${this.shape}`);
    }
    return this.values()[i * cols + j];
  }
}

export function decodeBuffer(raw: Buffer, dtype: DType, count: number): number[] {
  const { kind, itemsize, littleEndian: le } = dtype;
  const need = count * itemsize;
  if (raw.length < need) {
    throw new PickleError(
      `buffer holds ${raw.length} bytes, need ${need} for ${count} x ${dtype.code}`);
  }
  const out = new Array<number>(count);
  for (let i = 0; i < count; i++) {
    const off = i * itemsize;
    out[i] = readOne(raw, off, kind, itemsize, le);
  }
  return out;
}

function readOne(buf: Buffer, off: number, kind: string, size: number,
                 le: boolean): number {
  if (kind === "f") {
    if (size === 8) return le ? buf.readDoubleLE(off) : buf.readDoubleBE(off);
    if (size === 4) return le ? buf.readFloatLE(off) : buf.readFloatBE(off);
  } else if (kind === "i") {
    if (size === 8) {
      const v = le ? buf.readBigInt64LE(off) : buf.readBigInt64BE(off);
      if (v > BigInt(Number.MAX_SAFE_INTEGER) || v < -BigInt(Number.MAX_SAFE_INTEGER)) {
        throw new PickleError(`int64 value ${v} exceeds the safe range`);
      }
      return Number(v);
    }
    if (size === 4) return le ? buf.readInt32LE(off) : buf.readInt32BE(off);
    if (size === 2) return le ? buf.readInt16LE(off) : buf.readInt16BE(off);
    if (size === 1) return buf.readInt8(off);
  } else if (kind === "u") {
    if (size === 8) {
      const v = le ? buf.readBigUInt64LE(off) : buf.readBigUInt64BE(off);
      if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
        throw new PickleError(`uint64 value ${v} exceeds the safe range`);
      }
      return Number(v);
    }
    if (size === 4) return le ? buf.readUInt32LE(off) : buf.readUInt32BE(off);
    if (size === 2) return le ? buf.readUInt16LE(off) : buf.readUInt16BE(off);
    if (size === 1) return buf.readUInt8(off);
  } else if (kind === "b") {
    return buf.readUInt8(off) ? 1 : 0;
  }
  throw new PickleError(`unsupported dtype kind ${kind}${size}`);
}

export interface CSRMatrix {
  rows: number;
  cols: number;
  data: number[];
  indices: number[];
  indptr: number[];
}

/** Pull the CSR fields out of a generically captured scipy matrix. */
export function toCSR(obj: PyValue): CSRMatrix {
  if (!(obj instanceof PyObject)) {
    throw new PickleError("expected a captured sparse-matrix object");
  }
  const dict = obj.dict;
  const shape = (dict.get("_shape") ?? dict.get("shape")) as PyValue[] | undefined;
  const data = dict.get("data");
  const indices = dict.get("indices");
  const indptr = dict.get("indptr");
  if (!shape || !(data instanceof NDArray) || !(indices instanceof NDArray)
      || !(indptr instanceof NDArray)) {
    throw new PickleError(
      `sparse matrix ${obj.cls.qualified} is missing CSR fields`);
  }
  return {
    rows: Number(shape[0]),
    cols: Number(shape[1]),
    data: data.values(),
    indices: indices.values(),
    indptr: indptr.values(),
  };
}

export function csrRow(m: CSRMatrix, row: number): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let k = m.indptr[row]; k < m.indptr[row + 1]; k++) {
    out.push([m.indices[k], m.data[k]]);
  }
  out.sort((a, b) => a[0] - b[0]);
  return out;
}

export function csrToDense(m: CSRMatrix): number[][] {
  const out = Array.from({ length: m.rows }, () => new Array<number>(m.cols).fill(0));
  for (let i = 0; i < m.rows; i++) {
    for (const [j, v] of csrRow(m, i)) out[i][j] = v;
  }
  return out;
}

// ------------------------------------------------------------ registry

const reconstructHandler: ClassHandler = {
  construct: () => new NDArray(),
};

const dtypeHandler: ClassHandler = {
  construct: (args: PyValue[]) => new DType(String(asKeyString(args[0] as PyValue))),
};

const scalarHandler: ClassHandler = {
  construct: (args: PyValue[]) => {
    const [dtype, raw] = args;
    if (!(dtype instanceof DType) || !Buffer.isBuffer(raw)) {
      throw new PickleError("unexpected numpy scalar payload");
    }
    return decodeBuffer(raw, dtype, 1)[0];
  },
};

const defaultdictHandler: ClassHandler = {
  construct: () => new Map<PyValue, PyValue>(),
};

const reconstructorHandler: ClassHandler = {
  // copyreg._reconstructor(cls, base, state): plain new-style instance
  construct: (args: PyValue[]) => {
    const cls = args[0];
    if (cls instanceof PyGlobal) return new PyObject(cls, []);
    throw new PickleError("_reconstructor without a class global");
  },
};

const codecsEncodeHandler: ClassHandler = {
  // protocol-2 streams smuggle bytes as _codecs.encode(latin1_str, 'latin1')
  construct: (args: PyValue[]) => {
    const [text, encoding] = args;
    const codec = encoding === undefined ? "latin1" : String(asKeyString(encoding as PyValue));
    if (typeof text !== "string" || (codec !== "latin1" && codec !== "latin-1")) {
      throw new PickleError(`unsupported _codecs.encode arguments (${codec})`);
    }
    return Buffer.from(text, "latin1");
  },
};

export function defaultRegistry(): Registry {
  const registry: Registry = new Map();
  for (const mod of ["numpy.core.multiarray", "numpy._core.multiarray"]) {
    registry.set(`${mod}._reconstruct`, reconstructHandler);
    registry.set(`${mod}.scalar`, scalarHandler);
  }
  registry.set("numpy.dtype", dtypeHandler);
  registry.set("numpy.core.multiarray.dtype", dtypeHandler);
  registry.set("collections.defaultdict", defaultdictHandler);
  registry.set("collections.OrderedDict", defaultdictHandler);
  registry.set("copy_reg._reconstructor", reconstructorHandler);
  registry.set("copyreg._reconstructor", reconstructorHandler);
  registry.set("_codecs.encode", codecsEncodeHandler);
  return registry;
}
