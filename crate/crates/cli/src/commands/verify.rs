use clap::Args;
use ottm_core::verify::{bound_suite, gradcheck_suite, oracle_suite};

use crate::CliError;

#[derive(Debug, Clone, clap::ValueEnum)]
pub enum Suite {
    /// Exact transport cost never exceeds the negative decoder
    /// log-likelihood (vocabulary >= 8, costs in [0, 2]).
    Bound,
    /// Every analytic gradient of the joint loss against central finite
    /// differences.
    Gradcheck,
    /// Log-domain Sinkhorn against the exact solver: agreement at a sharp
    /// temperature, dominance at every temperature.
    Oracle,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Trial count; defaults to 1000 (bound), 20 (gradcheck), 200 (oracle).
    #[arg(long)]
    trials: Option<usize>,
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    match args.suite {
        Suite::Bound => {
            let trials = args.trials.unwrap_or(1000);
            let report = bound_suite(args.seed, trials)?;
            println!(
                "bound suite: {} trials, {} violations, min slack = {:.3e} (tolerance -{:.0e})",
                report.trials, report.violations, report.min_slack, report.tolerance
            );
            if !report.passed() {
                return Err(CliError::Verification(format!(
                    "transport bound violated on {} of {} trials",
                    report.violations, report.trials
                )));
            }
        }
        Suite::Gradcheck => {
            let trials = args.trials.unwrap_or(20);
            let report = gradcheck_suite(args.seed, trials)?;
            println!(
                "gradcheck suite: {} trials, {} parameters, max relative error = {:.3e} \
                 (tolerance {:.0e}), worst analytic/fd = {:.6e} / {:.6e}",
                report.trials,
                report.parameters_checked,
                report.max_rel_err,
                report.tolerance,
                report.worst_pair.0,
                report.worst_pair.1
            );
            if !report.passed() {
                return Err(CliError::Verification(format!(
                    "{} gradient entries disagreed with finite differences",
                    report.failures
                )));
            }
        }
        Suite::Oracle => {
            let trials = args.trials.unwrap_or(200);
            let report = oracle_suite(args.seed, trials)?;
            println!(
                "oracle suite: {} trials, {} violations, max relative gap at alpha 0.01 = \
                 {:.3e} (tolerance {:.0e}), min dominance slack = {:.3e} (tolerance -{:.0e})",
                report.trials,
                report.violations,
                report.max_rel_gap,
                report.rel_gap_tolerance,
                report.min_dominance_slack,
                report.dominance_tolerance
            );
            if !report.passed() {
                return Err(CliError::Verification(format!(
                    "Sinkhorn disagreed with the exact solver on {} checks",
                    report.violations
                )));
            }
        }
    }
    Ok(())
}
