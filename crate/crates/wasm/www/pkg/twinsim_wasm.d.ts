/* tslint:disable */
/* eslint-disable */

export class WasmTwin {
    free(): void;
    [Symbol.dispose](): void;
    centerline(): Float64Array;
    clear_map(): void;
    map_cells(): Uint8Array;
    /**
     * `[width, height, resolution, origin_x, origin_y]`.
     */
    map_info(): Float64Array;
    constructor(vehicle: string, scene: string);
    /**
     * `[x, y, yaw, speed, steering, engine_rpm, time, collided]`.
     */
    pose(): Float64Array;
    /**
     * Boundary recall in [0, 1], or −1 when the scene has no grid.
     */
    recall(): number;
    /**
     * Flattened `x, y` world points of the latest scan.
     */
    scan_points(): Float32Array;
    set_autopilot(on: boolean): void;
    set_mapping(on: boolean): void;
    step(throttle: number, steering: number, brake: number, ticks: number): void;
    /**
     * Ground-truth cells on the same lattice, empty for open scenes.
     */
    truth_cells(): Uint8Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_wasmtwin_free: (a: number, b: number) => void;
    readonly wasmtwin_centerline: (a: number) => [number, number];
    readonly wasmtwin_clear_map: (a: number) => void;
    readonly wasmtwin_map_cells: (a: number) => [number, number];
    readonly wasmtwin_map_info: (a: number) => [number, number];
    readonly wasmtwin_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly wasmtwin_pose: (a: number) => [number, number];
    readonly wasmtwin_recall: (a: number) => number;
    readonly wasmtwin_scan_points: (a: number) => [number, number];
    readonly wasmtwin_set_autopilot: (a: number, b: number) => [number, number];
    readonly wasmtwin_set_mapping: (a: number, b: number) => void;
    readonly wasmtwin_step: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly wasmtwin_truth_cells: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
