//! Simulation, statistics and planning for container deployments on a
//! Kubernetes-like cluster.

pub mod calibration;
pub mod cli;
pub mod format;
pub mod k8s;
pub mod planner;
