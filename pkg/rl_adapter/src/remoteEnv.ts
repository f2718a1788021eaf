import { ChildProcess, spawn } from "node:child_process";
import * as net from "node:net";
import * as readline from "node:readline";

export interface Observation {
    ev_power: number;
    total_load: number;
    available_energies: number[];
}

export type ActionMask = boolean[][];

export interface EnvSpec {
    action_space: number[];
    n_stations: number;
    observation_keys: string[];
    horizon: number;
    dt_hours: number;
    ev_capacity_kwh: number;
    station_power_kw: { min: number; rated: number; max: number };
}

export interface BridgeResponse {
    ok: boolean;
    obs: Observation | null;
    reward: number | null;
    done: boolean | null;
    mask: ActionMask | null;
    info: Record<string, unknown> | null;
    error?: string;
}

export interface StepResult {
    observation: Observation;
    reward: number;
    terminated: boolean;
    info: Record<string, unknown>;
}

export interface ResetResult {
    observation: Observation;
    mask: ActionMask;
}

export type LaunchSpec =
    | { command: string[] }
    | { host: string; port: number };

export class ProtocolError extends Error {}

const DEFAULT_COMMAND = ["python3", "-m", "vppsim.cli", "serve", "--stdio"];

/** Simulator launch command: explicit spec, else VPPSIM_CMD, else the default. */
export function resolveCommand(extraArgs: string[] = []): string[] {
    const base = process.env.VPPSIM_CMD
        ? process.env.VPPSIM_CMD.split(/\s+/)
        : DEFAULT_COMMAND;
    return [...base, ...extraArgs];
}

interface Transport {
    write(line: string): void;
    onLine(handler: (line: string) => void): void;
    onExit(handler: (detail: string) => void): void;
    destroy(): void;
}

function childTransport(child: ChildProcess): Transport {
    const rl = readline.createInterface({ input: child.stdout! });
    const stderrChunks: string[] = [];
    child.stderr?.on("data", (chunk) => stderrChunks.push(String(chunk)));
    return {
        write: (line) => child.stdin!.write(line),
        onLine: (handler) => rl.on("line", handler),
        onExit: (handler) =>
            child.on("close", (code) =>
                handler(`simulator exited (code ${code}): ${stderrChunks.join("")}`)
            ),
        destroy: () => child.kill(),
    };
}

function socketTransport(socket: net.Socket): Transport {
    const rl = readline.createInterface({ input: socket });
    return {
        write: (line) => socket.write(line),
        onLine: (handler) => rl.on("line", handler),
        onExit: (handler) => socket.on("close", () => handler("socket closed")),
        destroy: () => socket.destroy(),
    };
}

/**
 * One remote environment behind the line-delimited JSON protocol.
 *
 * Requests are strictly sequential: a new request only goes out once the
 * previous response arrived. The spec is fetched once and cached, and the
 * action mask of the latest response is kept for mask-aware learners.
 */
export class RemoteEnvHandle {
    private transport: Transport;
    private pending: Array<{
        resolve: (r: BridgeResponse) => void;
        reject: (e: Error) => void;
    }> = [];
    private cachedSpec: EnvSpec | null = null;
    private lastMask: ActionMask | null = null;
    private dead: string | null = null;

    private constructor(transport: Transport) {
        this.transport = transport;
        transport.onLine((line) => this.dispatch(line));
        transport.onExit((detail) => this.fail(detail));
    }

    /** Spawn the simulator as a child process speaking on stdio. */
    static spawnProcess(extraArgs: string[] = [], command?: string[]): RemoteEnvHandle {
        const argv = command ?? resolveCommand(extraArgs);
        const child = spawn(argv[0], argv.slice(1), {
            stdio: ["pipe", "pipe", "pipe"],
        });
        const handle = new RemoteEnvHandle(childTransport(child));
        child.on("error", (err) => handle.fail(`failed to start simulator: ${err.message}`));
        return handle;
    }

    /** Connect to a simulator already serving on a local socket. */
    static async connect(host: string, port: number): Promise<RemoteEnvHandle> {
        const socket = await new Promise<net.Socket>((resolve, reject) => {
            const s = net.createConnection({ host, port }, () => resolve(s));
            s.on("error", reject);
        });
        return new RemoteEnvHandle(socketTransport(socket));
    }

    private dispatch(line: string) {
        const waiter = this.pending.shift();
        let response: BridgeResponse;
        try {
            response = JSON.parse(line) as BridgeResponse;
        } catch (err) {
            if (waiter) this.pending.unshift(waiter); // let fail() reject it
            this.fail(`undecodable bridge line: ${String(line).slice(0, 120)}`);
            return;
        }
        if (!waiter) {
            this.fail("bridge sent an unsolicited response");
            return;
        }
        waiter.resolve(response);
    }

    private fail(detail: string) {
        if (this.dead) return;
        this.dead = detail;
        const waiters = this.pending;
        this.pending = [];
        for (const waiter of waiters) waiter.reject(new ProtocolError(detail));
        this.transport.destroy();
    }

    private request(payload: Record<string, unknown>): Promise<BridgeResponse> {
        if (this.dead) return Promise.reject(new ProtocolError(this.dead));
        return new Promise((resolve, reject) => {
            this.pending.push({ resolve, reject });
            this.transport.write(JSON.stringify(payload) + "\n");
        });
    }

    private async roundTrip(payload: Record<string, unknown>): Promise<BridgeResponse> {
        const response = await this.request(payload);
        if (!response.ok) {
            throw new ProtocolError(response.error ?? "bridge reported an error");
        }
        if (response.mask) this.lastMask = response.mask;
        return response;
    }

    /** Space shapes and limits; fetched from the bridge exactly once. */
    async spec(): Promise<EnvSpec> {
        if (!this.cachedSpec) {
            const response = await this.roundTrip({ op: "spec" });
            this.cachedSpec = response.info as unknown as EnvSpec;
        }
        return this.cachedSpec;
    }

    async reset(seed: number): Promise<ResetResult> {
        const response = await this.roundTrip({ op: "reset", seed });
        return { observation: response.obs!, mask: response.mask! };
    }

    async step(action: number[]): Promise<StepResult> {
        const response = await this.roundTrip({ op: "step", action });
        return {
            observation: response.obs!,
            reward: response.reward!,
            terminated: response.done!,
            info: response.info ?? {},
        };
    }

    /** Validity mask from the latest reset/step/mask response. */
    actionMasks(): ActionMask {
        if (!this.lastMask) throw new ProtocolError("no mask yet: reset first");
        return this.lastMask;
    }

    async refreshMask(): Promise<ActionMask> {
        const response = await this.roundTrip({ op: "mask" });
        return response.mask!;
    }

    get failure(): string | null {
        return this.dead;
    }

    async close(): Promise<void> {
        if (this.dead) return;
        try {
            await this.roundTrip({ op: "close" });
        } finally {
            this.transport.destroy();
            this.dead = this.dead ?? "closed";
        }
    }
}
