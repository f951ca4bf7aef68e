/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_igdemo_free: (a: number, b: number) => void;
export const igdemo_convergence: (a: number, b: number, c: number) => [number, number];
export const igdemo_exampleCount: (a: number) => number;
export const igdemo_new: (a: number) => [number, number, number];
export const plantedShortcut: (a: number, b: number) => [number, number];
export const reliability: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
