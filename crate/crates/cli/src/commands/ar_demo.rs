//! `ar-demo`: empirical vs closed-form AR(1) residual variance table.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use mimo_seer_core::baselines::{ar1_rollout, ar1_variance_closed_form, Ar1Coefficient, Ar1Params};
use mimo_seer_core::Error;

use crate::commands::{csv_writer, note};
use crate::{Cli, CliError, CliResult};

#[derive(Args, Serialize)]
pub struct ArDemoArgs {
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.9)]
    pub a: f64,

    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,

    /// Rollout steps.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,

    /// Monte-Carlo trials.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,

    /// Output CSV path.
    #[arg(long, default_value = "ar.csv")]
    pub out: PathBuf,
}

pub fn run(cli: &Cli, args: &ArDemoArgs) -> CliResult<()> {
    if args.steps < 1 {
        return Err(CliError::Usage("--steps must be >= 1".into()));
    }
    if args.trials < 2 {
        return Err(CliError::Usage("--trials must be >= 2".into()));
    }
    if args.sigma < 0.0 || !args.sigma.is_finite() {
        return Err(CliError::Usage("--sigma must be finite and >= 0".into()));
    }

    let seed = cli.seed.unwrap_or(0);
    let hash = crate::config::hash_of(&(args, seed));
    let params = Ar1Params {
        coefficient: Ar1Coefficient::Scalar(args.a),
        noise_std: args.sigma,
        horizon: args.steps,
        trials: args.trials,
        seed,
    };
    let result = ar1_rollout(&params)?;

    let mut w = csv_writer(&args.out, &hash, "step,empirical,closed_form,rel_error")?;
    for (i, &emp) in result.residual_variance.iter().enumerate() {
        let k = i + 1;
        let cf = ar1_variance_closed_form(args.a, args.sigma, k);
        let rel = if cf == 0.0 {
            if emp == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (emp - cf).abs() / cf
        };
        writeln!(w, "{k},{emp},{cf},{rel}").map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    note(
        cli,
        format!(
            "A = {}, sigma = {}, {} trials -> {}",
            args.a,
            args.sigma,
            args.trials,
            args.out.display()
        ),
    );
    Ok(())
}
