/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_wasmtwin_free: (a: number, b: number) => void;
export const wasmtwin_centerline: (a: number) => [number, number];
export const wasmtwin_clear_map: (a: number) => void;
export const wasmtwin_map_cells: (a: number) => [number, number];
export const wasmtwin_map_info: (a: number) => [number, number];
export const wasmtwin_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const wasmtwin_pose: (a: number) => [number, number];
export const wasmtwin_recall: (a: number) => number;
export const wasmtwin_scan_points: (a: number) => [number, number];
export const wasmtwin_set_autopilot: (a: number, b: number) => [number, number];
export const wasmtwin_set_mapping: (a: number, b: number) => void;
export const wasmtwin_step: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const wasmtwin_truth_cells: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
