//! QTC extraction, dictionaries, radial clustering, datasets and synthetic scenes.

pub mod cluster;
pub mod codec;
pub mod dataset;
pub mod dictionary;
pub mod error;
pub mod geom;
pub mod qtc;
pub mod synth;

pub use cluster::{
    assemble_samples, build_clusters, compute_n_star, window_pair_series, ClusterConfig, ClusterSample,
    Framework, Memberships, SampleData,
};
pub use dataset::{
    load_static_objects, load_trajectories, make_dataset, parse_static_objects, parse_trajectories,
    write_static_objects, write_trajectories, DatasetOptions, DatasetSplits, StaticObject, Track, TrajectorySet,
};
pub use dictionary::{
    build_dictionary, dict_lookup, DeviationReport, Dictionary, DictionaryBuild, LookupKey, LookupValue,
    RealizabilityReport, SamplingConfig,
};
pub use error::{CoreError, Result};
pub use geom::Vec2;
pub use qtc::{
    compute_qtc, compute_qtc_c1, compute_qtc_c2, conceptual_distance, qtc_series, PairWindow, PointState,
    QtcSymbol, QtcVariant, QtcVector, ToleranceSet,
};
pub use synth::{analytic_qtc, coverage_matrix, generate_scenario, Primitive, PrimitiveInstance, ScenarioSpec};
