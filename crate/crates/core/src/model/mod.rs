//! Domain data: network, DER catalog, time series, islanding and reliability inputs.

pub mod cluster;
pub mod finance;
pub mod islanding;
pub mod network;
pub mod scenario;
pub mod series;

pub use cluster::{cluster_representative_days, k_medoids, Clustering};
pub use finance::annuity_factor;
pub use islanding::{build_islanding_distribution, Gev, IslandingModel};
pub use network::{load_network, Bus, CustomerClass, Edge, Line, LineStatus, NetworkModel};
pub use scenario::{
    load_scenario, scenario_from_json, validate_scenario, AlgorithmParams, DerKind, DerSpec, DerUnit,
    GeneratorParams, IslandingSpec, ReliabilityData, ReliabilitySpec, ScenarioConfig, ScenarioDocument,
    StorageParams, Technology, TariffSchedule,
};
pub use series::{read_series_csv, RepresentativeDay, YearSeries, DAYS_PER_YEAR, HOURS_PER_DAY};
