import { ActionMask, Observation, RemoteEnvHandle } from "./remoteEnv.js";

/**
 * A small mask-aware policy-gradient learner.
 *
 * Per-station linear logits over a normalised observation, invalid entries
 * replaced by a large negative number before the softmax so masked actions
 * carry zero probability and zero gradient. Enough of a learner to exercise
 * mask forwarding over thousands of steps; not a training framework.
 */
export class MaskedPolicyLearner {
    readonly nStations: number;
    readonly nActions = 3;
    private weights: number[][][]; // [station][action][feature]
    private learningRate: number;
    private rngState: number;

    constructor(nStations: number, seed = 1, learningRate = 0.01) {
        this.nStations = nStations;
        this.learningRate = learningRate;
        this.rngState = seed >>> 0;
        const nFeatures = this.features(emptyObservation(nStations)).length;
        this.weights = Array.from({ length: nStations }, () =>
            Array.from({ length: this.nActions }, () =>
                Array.from({ length: nFeatures }, () => 0.01 * (this.random() - 0.5))
            )
        );
    }

    /** xorshift32; deterministic across runs for a given seed. */
    private random(): number {
        let x = this.rngState;
        x ^= x << 13;
        x >>>= 0;
        x ^= x >> 17;
        x ^= x << 5;
        x >>>= 0;
        this.rngState = x;
        return x / 0xffffffff;
    }

    features(obs: Observation): number[] {
        return [
            1.0,
            obs.total_load / 30.0,
            obs.ev_power / 44.0,
            ...obs.available_energies.map((e) => e / 100.0),
        ];
    }

    maskedProbabilities(obs: Observation, mask: ActionMask): number[][] {
        const feats = this.features(obs);
        return this.weights.map((stationWeights, s) => {
            const logits = stationWeights.map((row, a) =>
                mask[s][a]
                    ? row.reduce((acc, w, i) => acc + w * feats[i], 0)
                    : -1e9
            );
            const top = Math.max(...logits);
            const weights = logits.map((l) => Math.exp(l - top));
            const total = weights.reduce((a, b) => a + b, 0);
            return weights.map((w) => w / total);
        });
    }

    sampleAction(obs: Observation, mask: ActionMask): number[] {
        return this.maskedProbabilities(obs, mask).map((probs) => {
            const draw = this.random();
            let acc = 0;
            for (let a = 0; a < probs.length; a++) {
                acc += probs[a];
                if (draw < acc) return a;
            }
            return probs.length - 1;
        });
    }

    /** REINFORCE-style update; masked entries get no gradient. */
    update(
        obs: Observation,
        mask: ActionMask,
        action: number[],
        advantage: number
    ): void {
        const feats = this.features(obs);
        const probs = this.maskedProbabilities(obs, mask);
        for (let s = 0; s < this.nStations; s++) {
            for (let a = 0; a < this.nActions; a++) {
                if (!mask[s][a]) continue;
                const indicator = action[s] === a ? 1 : 0;
                const coeff = this.learningRate * advantage * (indicator - probs[s][a]);
                const row = this.weights[s][a];
                for (let i = 0; i < row.length; i++) row[i] += coeff * feats[i];
            }
        }
    }
}

function emptyObservation(nStations: number): Observation {
    return {
        ev_power: 0,
        total_load: 0,
        available_energies: Array(nStations).fill(0),
    };
}

export interface TrainingSummary {
    steps: number;
    episodes: number;
    rewardSum: number;
    invalidChoices: number;
}

/**
 * Run the learner against a remote environment for a fixed number of steps,
 * resetting whenever an episode terminates. Throws on any protocol error.
 */
export async function trainMaskedLearner(
    handle: RemoteEnvHandle,
    steps: number,
    seed = 1
): Promise<TrainingSummary> {
    const spec = await handle.spec();
    const learner = new MaskedPolicyLearner(spec.n_stations, seed);
    let { observation, mask } = await handle.reset(seed);
    let episodes = 1;
    let rewardSum = 0;
    let invalidChoices = 0;
    let baseline = 0;

    for (let t = 0; t < steps; t++) {
        const action = learner.sampleAction(observation, mask);
        action.forEach((a, s) => {
            if (!mask[s][a]) invalidChoices += 1;
        });
        const result = await handle.step(action);
        rewardSum += result.reward;
        baseline = 0.99 * baseline + 0.01 * result.reward;
        learner.update(observation, mask, action, result.reward - baseline);
        observation = result.observation;
        mask = handle.actionMasks();
        if (result.terminated) {
            ({ observation, mask } = await handle.reset(seed + episodes));
            episodes += 1;
        }
    }
    return { steps, episodes, rewardSum, invalidChoices };
}
