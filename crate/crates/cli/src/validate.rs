use risopt_core::validation::{oracle_suite, scaling_suite, stats_suite, CheckStatus};

use crate::{env_workers, Failure, Suite, ValidateArgs};

const DEFAULT_STATS_TRIALS: usize = 100_000;
const DEFAULT_ORACLE_SAMPLES: usize = 2_000;

pub fn run(args: &ValidateArgs, seed: u64) -> Result<(), Failure> {
    if args.trials == Some(0) {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let outcomes = match args.suite {
        Suite::Oracle => oracle_suite(seed, args.trials.unwrap_or(DEFAULT_ORACLE_SAMPLES))?,
        Suite::Stats => stats_suite(
            seed,
            args.trials.unwrap_or(DEFAULT_STATS_TRIALS),
            env_workers()?,
        )?,
        Suite::Scaling => scaling_suite()?,
    };
    for o in &outcomes {
        println!("{o}");
    }
    let count = |s: CheckStatus| outcomes.iter().filter(|o| o.status == s).count();
    let (pass, fail, open, off) = (
        count(CheckStatus::Pass),
        count(CheckStatus::Fail),
        count(CheckStatus::Inconclusive),
        count(CheckStatus::Deviates),
    );
    println!("summary: {pass} passed, {fail} failed, {open} inconclusive, {off} outside 3 sigma");
    if open > 0 {
        eprintln!("warning: {open} check(s) inconclusive; increase --trials for a decisive run");
    }
    if fail > 0 {
        return Err(Failure::Validation(format!("{fail} check(s) failed")));
    }
    Ok(())
}
