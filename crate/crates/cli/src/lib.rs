//! Command-line front end and judging service for `compat-core`.
//!
//! - [`evaluate`]: `eval` and `compare` over TREC run files
//! - [`campaign_cmd`]: the `campaign` subcommands
//! - [`store`]: campaign directory layout
//! - [`service`]: HTTP endpoints for live judging

pub mod args;
pub mod campaign_cmd;
pub mod evaluate;
pub mod service;
pub mod store;

use std::io::Write;

use anyhow::Result;

pub use args::{Cli, Command};
pub use service::{router, Service, ServiceState};
pub use store::CampaignDir;

/// Runs one parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Eval(args) => evaluate::eval(args, out),
        Command::Compare(args) => evaluate::compare(args, out),
        Command::Campaign(cmd) => campaign_cmd::run(cmd, out),
        Command::Serve(args) => {
            let dir = CampaignDir::open(&args.dir)?;
            tokio::runtime::Runtime::new()?.block_on(service::serve(dir, args.bind))
        }
    }
}
