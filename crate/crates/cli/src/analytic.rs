use risopt_core::scaling::{
    asymptotic_kappa, expected_power_los, expected_power_rayleigh,
    expected_power_rayleigh_two_operator, single_operator_ratio, AnalyticChannel, ScalingQuery,
};
use risopt_core::{GroupSizePolicy, RisArchitecture};

use crate::{AnalyticArgs, AnalyticChannelArg, Case, Failure};

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn group_policy(arg: &Option<String>) -> Result<Option<GroupSizePolicy>, Failure> {
    match arg.as_deref() {
        None => Ok(None),
        Some("full") => Ok(Some(GroupSizePolicy::FullyConnected)),
        Some(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&g| g > 0)
            .map(|g| Some(GroupSizePolicy::Fixed(g)))
            .ok_or_else(|| {
                usage(format!(
                    "--Gs expects a positive integer or `full`, got `{v}`"
                ))
            }),
    }
}

fn fixed_group_size(arg: &Option<String>) -> Result<usize, Failure> {
    match group_policy(arg)? {
        Some(GroupSizePolicy::Fixed(g)) => Ok(g),
        _ => Err(usage("--Gs must be a number here")),
    }
}

/// Group size implied by the theorem case, checked against `--Gs`.
fn resolve_group_size(args: &AnalyticArgs, theorem: u8, n: usize) -> Result<usize, Failure> {
    let l = args.operators;
    let given = group_policy(&args.group_size)?.map(|p| p.group_size(n));
    let gs = match (args.case, given) {
        (Some(Case::I), g) => {
            if g.is_some_and(|g| g != n) {
                return Err(usage(
                    "case (i) is the fully-connected RIS: Gs must equal N",
                ));
            }
            n
        }
        (Some(Case::Iii), g) if theorem != 3 => {
            if g.is_some_and(|g| g != 1) {
                return Err(usage(
                    "case (iii) is the single-connected RIS: Gs must be 1",
                ));
            }
            1
        }
        (Some(Case::Iii), Some(g)) => {
            if g >= l {
                return Err(usage(format!(
                    "case (iii) requires Gs < L (got Gs = {g}, L = {l})"
                )));
            }
            g
        }
        (Some(Case::Iii), None) => return Err(usage("case (iii) of theorem 3 needs --Gs")),
        (Some(Case::Ii), Some(g)) => {
            if theorem == 3 && g < l {
                return Err(usage(format!(
                    "case (ii) requires Gs >= L (got Gs = {g}, L = {l})"
                )));
            }
            if theorem != 3 && g < 2 {
                return Err(usage(format!("case (ii) requires Gs >= 2 (got Gs = {g})")));
            }
            g
        }
        (Some(Case::Ii), None) => return Err(usage("case (ii) needs --Gs")),
        (None, Some(g)) => g,
        (None, None) => return Err(usage("pass --Gs or --case")),
    };
    Ok(gs)
}

pub fn run(args: &AnalyticArgs) -> Result<(), Failure> {
    if args.kappa {
        let policy = group_policy(&args.group_size)?.ok_or_else(|| usage("--kappa needs --Gs"))?;
        let channel = match args.channel {
            AnalyticChannelArg::Rayleigh => AnalyticChannel::Rayleigh,
            AnalyticChannelArg::Los => AnalyticChannel::LoS,
        };
        let k = asymptotic_kappa(policy, args.operators, channel)?;
        println!("kappa: {k:.16e}");
        return Ok(());
    }
    if args.ratio {
        let gs = fixed_group_size(&args.group_size)?;
        let r = single_operator_ratio(gs, args.operators)?;
        println!("single_operator_ratio: {r:.16e}");
        return Ok(());
    }
    let theorem = args
        .theorem
        .ok_or_else(|| usage("pass --theorem, --kappa or --ratio"))?;
    let n = args.n.ok_or_else(|| usage("--theorem needs --N"))?;
    if theorem != 3 && args.operators != 2 {
        return Err(usage(format!(
            "theorem {theorem} is for L = 2 (got L = {})",
            args.operators
        )));
    }
    let gs = resolve_group_size(args, theorem, n)?;
    let arch = RisArchitecture::with_group_size(n, gs)?;
    let q = ScalingQuery::new(arch, args.operators, args.rho_ri, args.rho_it1)?;
    let value = match theorem {
        1 => expected_power_rayleigh_two_operator(&q)?,
        2 => {
            let d = args
                .delta_mu
                .ok_or_else(|| usage("theorem 2 needs --delta-mu"))?;
            expected_power_los(&q, d)?
        }
        _ => expected_power_rayleigh(&q)?,
    };
    println!("architecture: {arch}");
    println!("operators: {}", args.operators);
    println!("expected_power: {value:.16e}");
    Ok(())
}
