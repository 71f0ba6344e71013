"""Delay-based reservoir computing with delayed-input optimisation."""

from .errors import (ConfigError, DelayRCError, FormatError, IntegrationError,
                     NarmaDivergenceError, NumericalError, SingularSystemError, ValidationError)
from .masking import (DelayedInputSpec, InputSequence, MaskDistribution, MaskPair, build_drive,
                      calibrate_input_range, generate_masks)
from .metrics import ErrorRate, error_rate, nmse
from .optimizer import (DEFAULT_ATTENUATION_MAP, PRESETS, AttenuationMap, ClassificationObjective,
                        GridResult, Mode, SeriesObjective, SweepCurve, TaskPreset, map_attenuation,
                        scan_beta2_delay, sweep_attenuation)
from .readout import (TrainedReadout, Utterance, UtteranceDataset, kfold_evaluate,
                      make_classification_targets, make_readout_pipeline, predict,
                      random_resplit_evaluate, train_ridge, winner_takes_all)
from .reservoir import Nonlinearity, ReservoirParams, ReservoirState, StateMatrix, run, step
from .tasks import (MackeyGlassParams, Narma10Params, SeriesTask, SplitSpec, apply_split,
                    generate_mackey_glass, generate_narma10, generate_separable_utterances,
                    generate_temporal_context_utterances)

__version__ = "0.1.0"
