/* tslint:disable */
/* eslint-disable */

/**
 * Row-major taps of the rank-2 or rank-3 stencil.
 */
export function kernel_taps(rank: number, sigma: number): Float64Array;

/**
 * Calibration report, as JSON, of an over-confident prediction on a
 * two-class 32x32 phantom.
 */
export function reliability_json(strength: number, accuracy: number, bins: number, seed: bigint): string;

/**
 * Soft labels for a `rows x cols` label grid, class-major.
 *
 * `method` is one of `onehot`, `ls` or `svls`; `alpha` is read for `ls`
 * only and `sigma` for `svls` only.
 */
export function smooth_grid(labels: Uint8Array, rows: number, cols: number, classes: number, method: string, alpha: number, sigma: number): Float32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly kernel_taps: (a: number, b: number) => [number, number, number, number];
    readonly reliability_json: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly smooth_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
