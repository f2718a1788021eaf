export {
    ActionMask,
    BridgeResponse,
    EnvSpec,
    LaunchSpec,
    Observation,
    ProtocolError,
    RemoteEnvHandle,
    ResetResult,
    StepResult,
    resolveCommand,
} from "./remoteEnv.js";
export {
    MaskedPolicyLearner,
    TrainingSummary,
    trainMaskedLearner,
} from "./maskedLearner.js";
