"""navparse: map natural-language commands to website navigation instructions.

The library scores declaratively specified page actions against a
command, extracts the command span mentioning each parameter, resolves
closed-domain parameter values by blended semantic and lexical
similarity, and combines everything into the single best navigation
instruction. Training, dataset generation, evaluation and serving live
in the submodules re-exported here.
"""

__version__ = "0.1.0"

from .schema import (ActionSchema, ParameterSpec, SchemaError, SiteSchema,
                     UnknownPageError, actions_of, load_site_schema,
                     save_site_schema, validate_site_schema)
from .dataset import (CommandTemplate, DatasetError, Example, MentionSpan,
                      NavigationInstruction, ParaphraseTable, ValueAssignment,
                      generate, load_examples, save_examples, split)
from .inference import (InferenceConfig, ParserModels, ScoredPrediction,
                        assign_parameter, parse, prediction_to_dict,
                        score_candidate)
from .evaluation import (EvalReport, classify_errors, format_metrics_table,
                         per_example_pr, report)
from .orchestrator import (ModelBundle, TrainingConfig, load_bundle,
                           save_bundle, train_all, tune_inference)

__all__ = [
    "ActionSchema", "ParameterSpec", "SchemaError", "SiteSchema",
    "UnknownPageError", "actions_of", "load_site_schema", "save_site_schema",
    "validate_site_schema",
    "CommandTemplate", "DatasetError", "Example", "MentionSpan",
    "NavigationInstruction", "ParaphraseTable", "ValueAssignment",
    "generate", "load_examples", "save_examples", "split",
    "InferenceConfig", "ParserModels", "ScoredPrediction",
    "assign_parameter", "parse", "prediction_to_dict", "score_candidate",
    "EvalReport", "classify_errors", "format_metrics_table",
    "per_example_pr", "report",
    "ModelBundle", "TrainingConfig", "load_bundle", "save_bundle",
    "train_all", "tune_inference",
    "__version__",
]
