/* tslint:disable */
/* eslint-disable */

/**
 * Session state: the current configuration and the generator.
 */
export class Lab {
    free(): void;
    [Symbol.dispose](): void;
    condition(n: number, p: number, sweeps: number): string;
    constructor(seed: number);
    /**
     * JSON with `svg` and `stats`.
     */
    sample(half_width: number, p: number, q: number, sweeps: number): string;
    surgery(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lab_free: (a: number, b: number) => void;
    readonly lab_condition: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly lab_new: (a: number) => [number, number, number];
    readonly lab_sample: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly lab_surgery: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
