/* tslint:disable */
/* eslint-disable */

/**
 * Random relative velocity `V` on an `n × n` grid, scaled by `lambda`, and
 * its drag `V|V|`: four planes `V_x, V_y, D_x, D_y`, row-major in `y`.
 */
export function drag_field(n: number, seed: bigint, decay: number, lambda: number): Float64Array;

/**
 * Unforced run from seeded data of unit energy. Returns `[t, E_a, E_o]`
 * triples for the initial state and every step.
 */
export function energy_decay(n: number, nz: number, steps: number, dt: number, seed: bigint, mode: string): Float64Array;

/**
 * Block multipliers `φ_0 … φ_kmax` sampled at `samples` points of
 * `[0, xi_max]`, block by block; the last row is their sum.
 */
export function lp_multipliers(kmax: number, samples: number, xi_max: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly drag_field: (a: number, b: bigint, c: number, d: number) => [number, number, number, number];
    readonly energy_decay: (a: number, b: number, c: number, d: number, e: bigint, f: number, g: number) => [number, number, number, number];
    readonly lp_multipliers: (a: number, b: number, c: number) => [number, number];
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
