//! Synthetic spatial question answering: scene and question generation,
//! training, evaluation and ablations.

mod ablate;
mod config;
mod dataset;
mod evaluate;
mod question;
mod scene;
mod train;

pub use ablate::{
    ablation_from_checkpoints, checkpoint_name, run_ablation, score_models, sign_test_p, AblationResult, AblationRun,
    Comparison,
};
pub use config::{SegmentationConfig, TrainConfig};
pub use dataset::{
    build_sample, make_item, scene_seed, segment_scene, text_vocabulary, DataItem, Dataset, SceneGraph, Split, FEATURE_DIM,
};
pub use evaluate::{evaluate, evaluate_checkpoint, Answerer, EvalTable, FamilyScore};
pub use question::{
    answer_vocabulary, explain_hidden, fill, generate_question, location_of, oracle_answer, question_words, QAPair, TEMPLATES,
};
pub use scene::{
    compute_relations, generate_scene, mask_bbox, path_position, BBox, Color, Family, Placement, Relation, SceneObject,
    SceneSpec, Shape, SyntheticScene, PATH_GRAY,
};
pub use train::{metrics_csv, train, train_on, EpochMetrics, TrainOutcome};
