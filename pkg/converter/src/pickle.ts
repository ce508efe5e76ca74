/**
 * Minimal pickle reader for the upstream dataset serialization.
 *
 * Supports the opcode set CPython emits for protocols 0-2 plus the
 * protocol 3/4 codes modern dumps use (frames, memoize, stack globals,
 * short unicode/bytes). Container values map to natural JS types:
 * dict -> Map, list/tuple -> Array, bytes/str(py2) -> Buffer,
 * unicode -> string, None -> null. Class instances are either handled by
 * a registered constructor (numpy, scipy, defaultdict) or captured as
 * generic {cls, args, state} objects.
 */

export class PickleError extends Error {}

export type PyValue =
  | null
  | boolean
  | number
  | bigint
  | string
  | Buffer
  | PyValue[]
  | Map<PyValue, PyValue>
  | Set<PyValue>
  | PyGlobal
  | PyObject
  | object;

/** A resolved `module.name` reference pushed by GLOBAL/STACK_GLOBAL. */
export class PyGlobal {
  constructor(readonly module: string, readonly name: string) {}
  get qualified(): string {
    return `${this.module}.${this.name}`;
  }
}

/** Fallback representation of an instance nothing special handles. */
export class PyObject {
  state: PyValue | undefined;
  dict = new Map<string, PyValue>();
  constructor(readonly cls: PyGlobal, readonly args: PyValue[]) {}

  setstate(state: PyValue): void {
    if (state instanceof Map) {
      for (const [k, v] of state) {
        this.dict.set(asKeyString(k), v);
      }
    } else {
      this.state = state;
    }
  }
}

export function asKeyString(key: PyValue): string {
  if (typeof key === "string") return key;
  if (Buffer.isBuffer(key)) return key.toString("latin1");
  return String(key);
}

export interface ClassHandler {
  /** REDUCE/NEWOBJ/INST with these arguments. */
  construct(args: PyValue[]): PyValue;
  /** BUILD; default merges Map state into PyObject-style dicts. */
  setstate?(obj: PyValue, state: PyValue): void;
}

export type Registry = Map<string, ClassHandler>;

const MARK = Symbol("mark");

export class Unpickler {
  private pos = 0;
  private stack: (PyValue | typeof MARK)[] = [];
  private memo = new Map<number, PyValue>();

  constructor(private readonly data: Buffer,
              private readonly registry: Registry = new Map()) {}

  load(): PyValue {
    for (;;) {
      if (this.pos >= this.data.length) {
        throw new PickleError("ran off the end of the pickle stream");
      }
      const op = this.data[this.pos++];
      const result = this.dispatch(op);
      if (result !== undefined) return result;
    }
  }

  // ------------------------------------------------------------- plumbing

  private byte(): number {
    return this.data[this.pos++];
  }

  private bytes(n: number): Buffer {
    if (this.pos + n > this.data.length) {
      throw new PickleError("truncated pickle stream");
    }
    const out = this.data.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  private line(): string {
    const nl = this.data.indexOf(0x0a, this.pos);
    if (nl < 0) throw new PickleError("unterminated text line");
    const out = this.data.subarray(this.pos, nl).toString("latin1");
    this.pos = nl + 1;
    return out;
  }

  private push(v: PyValue | typeof MARK): void {
    this.stack.push(v);
  }

  private pop(): PyValue {
    if (this.stack.length === 0) throw new PickleError("stack underflow");
    const v = this.stack.pop();
    if (v === MARK) throw new PickleError("unexpected mark on stack");
    return v as PyValue;
  }

  private top(): PyValue {
    const v = this.stack[this.stack.length - 1];
    if (v === undefined || v === MARK) throw new PickleError("bad stack top");
    return v as PyValue;
  }

  private popToMark(): PyValue[] {
    const items: PyValue[] = [];
    for (;;) {
      if (this.stack.length === 0) throw new PickleError("no mark found");
      const v = this.stack.pop();
      if (v === MARK) break;
      items.push(v as PyValue);
    }
    return items.reverse();
  }

  private memoPut(index: number): void {
    this.memo.set(index, this.top());
  }

  private handlerFor(g: PyGlobal): ClassHandler | undefined {
    return this.registry.get(g.qualified);
  }

  private instantiate(callable: PyValue, args: PyValue[]): PyValue {
    if (callable instanceof PyGlobal) {
      const handler = this.handlerFor(callable);
      if (handler) return handler.construct(args);
      return new PyObject(callable, args);
    }
    throw new PickleError(`cannot call non-global ${String(callable)}`);
  }

  private applyState(obj: PyValue, state: PyValue): void {
    const anyObj = obj as { __pickle_setstate__?: (s: PyValue) => void };
    if (obj instanceof PyObject) {
      const handler = this.handlerFor(obj.cls);
      if (handler?.setstate) {
        handler.setstate(obj, state);
        return;
      }
      obj.setstate(state);
      return;
    }
    if (typeof anyObj?.__pickle_setstate__ === "function") {
      anyObj.__pickle_setstate__(state);
      return;
    }
    if (obj instanceof Map && state instanceof Map) {
      for (const [k, v] of state) obj.set(k, v);
      return;
    }
    throw new PickleError(`cannot BUILD state onto ${String(obj)}`);
  }

  // ------------------------------------------------------------- opcodes

  private dispatch(op: number): PyValue | undefined {
    switch (op) {
      case 0x80: {   // PROTO
        const proto = this.byte();
        if (proto > 5) throw new PickleError(`unsupported protocol ${proto}`);
        return undefined;
      }
      case 0x95:     // FRAME: length prefix, content follows inline
        this.bytes(8);
        return undefined;
      case 0x2e:     // STOP '.'
        return this.pop();

      // -- basic scalars
      case 0x4e:     // NONE 'N'
        this.push(null);
        return undefined;
      case 0x88:     // NEWTRUE
        this.push(true);
        return undefined;
      case 0x89:     // NEWFALSE
        this.push(false);
        return undefined;
      case 0x49: {   // INT 'I' (text; 00/01 are booleans)
        const text = this.line();
        if (text === "00") this.push(false);
        else if (text === "01") this.push(true);
        else this.push(parseInt(text, 10));
        return undefined;
      }
      case 0x4a:     // BININT (signed 4-byte LE)
        this.push(this.bytes(4).readInt32LE(0));
        return undefined;
      case 0x4b:     // BININT1
        this.push(this.byte());
        return undefined;
      case 0x4d:     // BININT2
        this.push(this.bytes(2).readUInt16LE(0));
        return undefined;
      case 0x4c: {   // LONG 'L' (text with trailing L)
        const text = this.line().replace(/L$/, "");
        this.push(safeBigToNumber(BigInt(text)));
        return undefined;
      }
      case 0x8a: {   // LONG1
        const n = this.byte();
        this.push(decodeLong(this.bytes(n)));
        return undefined;
      }
      case 0x8b: {   // LONG4
        const n = this.bytes(4).readUInt32LE(0);
        this.push(decodeLong(this.bytes(n)));
        return undefined;
      }
      case 0x46:     // FLOAT 'F' (text)
        this.push(parseFloat(this.line()));
        return undefined;
      case 0x47:     // BINFLOAT (8-byte big-endian)
        this.push(this.bytes(8).readDoubleBE(0));
        return undefined;

      // -- strings and bytes
      case 0x53:     // STRING 'S' (quoted, escaped; py2 str -> bytes)
        this.push(unescapePyString(this.line()));
        return undefined;
      case 0x54: {   // BINSTRING
        const n = this.bytes(4).readUInt32LE(0);
        this.push(Buffer.from(this.bytes(n)));
        return undefined;
      }
      case 0x55: {   // SHORT_BINSTRING
        const n = this.byte();
        this.push(Buffer.from(this.bytes(n)));
        return undefined;
      }
      case 0x42: {   // BINBYTES
        const n = this.bytes(4).readUInt32LE(0);
        this.push(Buffer.from(this.bytes(n)));
        return undefined;
      }
      case 0x43: {   // SHORT_BINBYTES
        const n = this.byte();
        this.push(Buffer.from(this.bytes(n)));
        return undefined;
      }
      case 0x8e: {   // BINBYTES8
        const n = safeBigToNumber(this.bytes(8).readBigUInt64LE(0));
        this.push(Buffer.from(this.bytes(n)));
        return undefined;
      }
      case 0x56:     // UNICODE 'V' (raw-unicode-escape line)
        this.push(decodeRawUnicodeEscape(this.line()));
        return undefined;
      case 0x58: {   // BINUNICODE
        const n = this.bytes(4).readUInt32LE(0);
        this.push(this.bytes(n).toString("utf8"));
        return undefined;
      }
      case 0x8c: {   // SHORT_BINUNICODE
        const n = this.byte();
        this.push(this.bytes(n).toString("utf8"));
        return undefined;
      }
      case 0x8d: {   // BINUNICODE8
        const n = safeBigToNumber(this.bytes(8).readBigUInt64LE(0));
        this.push(this.bytes(n).toString("utf8"));
        return undefined;
      }

      // -- containers
      case 0x28:     // MARK '('
        this.push(MARK);
        return undefined;
      case 0x30:     // POP '0'
        this.stack.pop();
        return undefined;
      case 0x31:     // POP_MARK '1'
        this.popToMark();
        return undefined;
      case 0x32:     // DUP '2'
        this.push(this.top());
        return undefined;
      case 0x29:     // EMPTY_TUPLE ')'
        this.push([]);
        return undefined;
      case 0x74:     // TUPLE 't'
        this.push(this.popToMark());
        return undefined;
      case 0x85:     // TUPLE1
        this.push([this.pop()]);
        return undefined;
      case 0x86: {   // TUPLE2
        const b = this.pop();
        const a = this.pop();
        this.push([a, b]);
        return undefined;
      }
      case 0x87: {   // TUPLE3
        const c = this.pop();
        const b = this.pop();
        const a = this.pop();
        this.push([a, b, c]);
        return undefined;
      }
      case 0x5d:     // EMPTY_LIST ']'
        this.push([]);
        return undefined;
      case 0x6c:     // LIST 'l'
        this.push(this.popToMark());
        return undefined;
      case 0x61: {   // APPEND 'a'
        const v = this.pop();
        const list = this.top();
        if (!Array.isArray(list)) throw new PickleError("APPEND to non-list");
        list.push(v);
        return undefined;
      }
      case 0x65: {   // APPENDS 'e'
        const items = this.popToMark();
        const list = this.top();
        if (!Array.isArray(list)) throw new PickleError("APPENDS to non-list");
        list.push(...items);
        return undefined;
      }
      case 0x7d:     // EMPTY_DICT '}'
        this.push(new Map());
        return undefined;
      case 0x64: {   // DICT 'd'
        const items = this.popToMark();
        const map = new Map<PyValue, PyValue>();
        for (let i = 0; i + 1 < items.length; i += 2) {
          map.set(normalizeKey(items[i]), items[i + 1]);
        }
        this.push(map);
        return undefined;
      }
      case 0x73: {   // SETITEM 's'
        const v = this.pop();
        const k = this.pop();
        setItem(this.top(), k, v);
        return undefined;
      }
      case 0x75: {   // SETITEMS 'u'
        const items = this.popToMark();
        const target = this.top();
        for (let i = 0; i + 1 < items.length; i += 2) {
          setItem(target, items[i], items[i + 1]);
        }
        return undefined;
      }
      case 0x8f:     // EMPTY_SET
        this.push(new Set());
        return undefined;
      case 0x90:     // FROZENSET
        this.push(new Set(this.popToMark()));
        return undefined;
      case 0x91: {   // ADDITEMS
        const items = this.popToMark();
        const target = this.top();
        if (!(target instanceof Set)) throw new PickleError("ADDITEMS to non-set");
        for (const item of items) target.add(item);
        return undefined;
      }

      // -- memo
      case 0x70:     // PUT 'p' (text index)
        this.memoPut(parseInt(this.line(), 10));
        return undefined;
      case 0x71:     // BINPUT 'q'
        this.memoPut(this.byte());
        return undefined;
      case 0x72:     // LONG_BINPUT 'r'
        this.memoPut(this.bytes(4).readUInt32LE(0));
        return undefined;
      case 0x94:     // MEMOIZE
        this.memoPut(this.memo.size);
        return undefined;
      case 0x67: {   // GET 'g'
        this.push(this.memoGet(parseInt(this.line(), 10)));
        return undefined;
      }
      case 0x68:     // BINGET 'h'
        this.push(this.memoGet(this.byte()));
        return undefined;
      case 0x6a:     // LONG_BINGET 'j'
        this.push(this.memoGet(this.bytes(4).readUInt32LE(0)));
        return undefined;

      // -- globals and object construction
      case 0x63: {   // GLOBAL 'c' (module and name lines)
        const module = this.line();
        const name = this.line();
        this.push(new PyGlobal(module, name));
        return undefined;
      }
      case 0x93: {   // STACK_GLOBAL
        const name = this.pop();
        const module = this.pop();
        this.push(new PyGlobal(String(asKeyString(module)),
                               String(asKeyString(name))));
        return undefined;
      }
      case 0x52: {   // REDUCE 'R'
        const args = this.pop();
        const callable = this.pop();
        if (!Array.isArray(args)) throw new PickleError("REDUCE args not a tuple");
        this.push(this.instantiate(callable, args));
        return undefined;
      }
      case 0x81: {   // NEWOBJ
        const args = this.pop();
        const cls = this.pop();
        if (!Array.isArray(args)) throw new PickleError("NEWOBJ args not a tuple");
        this.push(this.instantiate(cls, args));
        return undefined;
      }
      case 0x92: {   // NEWOBJ_EX
        this.pop();  // kwargs ignored: nothing we reconstruct uses them
        const args = this.pop();
        const cls = this.pop();
        this.push(this.instantiate(cls, args as PyValue[]));
        return undefined;
      }
      case 0x69: {   // INST 'i' (module/name lines, args back to mark)
        const module = this.line();
        const name = this.line();
        const args = this.popToMark();
        this.push(this.instantiate(new PyGlobal(module, name), args));
        return undefined;
      }
      case 0x6f: {   // OBJ 'o'
        const items = this.popToMark();
        const cls = items.shift();
        this.push(this.instantiate(cls as PyValue, items));
        return undefined;
      }
      case 0x62: {   // BUILD 'b'
        const state = this.pop();
        const obj = this.top();
        this.applyState(obj, state);
        return undefined;
      }

      default:
        throw new PickleError(
          `unsupported pickle opcode 0x${op.toString(16)} at offset ${this.pos - 1}`);
    }
  }

  private memoGet(index: number): PyValue {
    if (!this.memo.has(index)) {
      throw new PickleError(`memo index ${index} not set`);
    }
    return this.memo.get(index) as PyValue;
  }
}

function setItem(target: PyValue, key: PyValue, value: PyValue): void {
  if (target instanceof Map) {
    target.set(normalizeKey(key), value);
    return;
  }
  if (target instanceof PyObject) {
    target.dict.set(asKeyString(key), value);
    return;
  }
  const anySet = (target as { __pickle_setitem__?: (k: PyValue, v: PyValue) => void });
  if (typeof anySet?.__pickle_setitem__ === "function") {
    anySet.__pickle_setitem__(key, value);
    return;
  }
  throw new PickleError("SETITEM on unsupported container");
}

/** Buffers make poor Map keys; dict keys that are py2 strings become JS strings. */
function normalizeKey(key: PyValue): PyValue {
  return Buffer.isBuffer(key) ? key.toString("latin1") : key;
}

function safeBigToNumber(v: bigint): number {
  if (v > BigInt(Number.MAX_SAFE_INTEGER) || v < -BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new PickleError(`integer ${v} exceeds the safe range`);
  }
  return Number(v);
}

/** Little-endian two's-complement integer (LONG1/LONG4 payload). */
export function decodeLong(raw: Buffer): number {
  if (raw.length === 0) return 0;
  let value = 0n;
  for (let i = raw.length - 1; i >= 0; i--) {
    value = (value << 8n) | BigInt(raw[i]);
  }
  if (raw[raw.length - 1] & 0x80) {
    value -= 1n << BigInt(8 * raw.length);
  }
  return safeBigToNumber(value);
}

/** Undo repr()-style escaping in a protocol-0 STRING payload. */
export function unescapePyString(text: string): Buffer {
  if (text.length >= 2) {
    const quote = text[0];
    if ((quote === "'" || quote === '"') && text.endsWith(quote)) {
      text = text.slice(1, -1);
    }
  }
  const out: number[] = [];
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (ch !== "\\") {
      out.push(ch.charCodeAt(0) & 0xff);
      continue;
    }
    const next = text[++i];
    switch (next) {
      case "\\": out.push(0x5c); break;
      case "'": out.push(0x27); break;
      case '"': out.push(0x22); break;
      case "n": out.push(0x0a); break;
      case "r": out.push(0x0d); break;
      case "t": out.push(0x09); break;
      case "0": out.push(0x00); break;
      case "x":
        out.push(parseInt(text.slice(i + 1, i + 3), 16));
        i += 2;
        break;
      default:
        throw new PickleError(`unknown escape \\${next}`);
    }
  }
  return Buffer.from(out);
}

function decodeRawUnicodeEscape(text: string): string {
  return text.replace(/\\u([0-9a-fA-F]{4})/g,
                      (_, hex) => String.fromCharCode(parseInt(hex, 16)));
}

export function loads(data: Buffer, registry?: Registry): PyValue {
  return new Unpickler(data, registry).load();
}
