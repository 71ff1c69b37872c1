//! Missed-recall detection pipeline: file formats, transports, stages,
//! and reporting around the pure core in `recallcheck-core`.

pub mod backend;
pub mod catalog_io;
pub mod config;
pub mod gateway;
pub mod generator;
pub mod pipeline;
pub mod report;
pub mod sim_server;
pub mod validator;
