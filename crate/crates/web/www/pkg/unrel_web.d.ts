/* tslint:disable */
/* eslint-disable */

/**
 * A trained toy model kept alive between calls so the page can query
 * attributions interactively.
 */
export class IgDemo {
    free(): void;
    [Symbol.dispose](): void;
    convergence(index: number, steps: number): string;
    exampleCount(): number;
    constructor(seed: number);
}

export function plantedShortcut(rate: number, seed: number): string;

export function reliability(n: number, n_bins: number, sharpness: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_igdemo_free: (a: number, b: number) => void;
    readonly igdemo_convergence: (a: number, b: number, c: number) => [number, number];
    readonly igdemo_exampleCount: (a: number) => number;
    readonly igdemo_new: (a: number) => [number, number, number];
    readonly plantedShortcut: (a: number, b: number) => [number, number];
    readonly reliability: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
