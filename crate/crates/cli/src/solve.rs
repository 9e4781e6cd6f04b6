use risopt_core::channels::ScenarioChannels;
use risopt_core::formats::{parse_complex, read_channels, write_theta};
use risopt_core::harness::Geometry;
use risopt_core::linalg::{max_abs_diff, ComplexMatrix};
use risopt_core::rng::RngStream;
use risopt_core::solver::{self, generate_targets, TargetMode, TargetReflections};
use risopt_core::{channels, RisArchitecture};

use crate::{Failure, SolveArgs};

fn random_scenario(
    args: &SolveArgs,
    seed: u64,
) -> Result<(ScenarioChannels, TargetReflections, RisArchitecture), Failure> {
    let n = args
        .n
        .ok_or_else(|| Failure::Usage("--random needs --N".into()))?;
    let arch = RisArchitecture::new(n, args.groups)?;
    let geometry = Geometry::default();
    let mut rng = RngStream::derived(seed, &[0x5017e]).generator();
    let h_ri = channels::rayleigh_vector(n, geometry.ris_user_gain()?, &mut rng);
    let h_it = (0..args.operators)
        .map(|l| {
            Ok(channels::rayleigh_vector(
                n,
                geometry.bs_ris_gain(l)?,
                &mut rng,
            ))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let ch = ScenarioChannels::new(h_ri, h_it)?;
    let targets = generate_targets(&ch, &arch, TargetMode::Haar, &mut rng)?;
    Ok((ch, targets, arch))
}

fn dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

pub fn run(args: &SolveArgs, seed: u64) -> Result<(), Failure> {
    if !args.tx_power.is_finite() || args.tx_power <= 0.0 {
        return Err(Failure::Usage("--tx-power must be positive".into()));
    }
    let (ch, targets, arch) = match &args.channels {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let (ch, t) = read_channels(&text)?;
            let arch = RisArchitecture::new(ch.n(), args.groups)?;
            (ch, t, arch)
        }
        None => random_scenario(args, seed)?,
    };

    let sol = match &args.direct_path {
        Some(token) => {
            let h_rt = parse_complex(token).ok_or_else(|| {
                Failure::Usage(format!("--direct-path expects `re+imj`, got `{token}`"))
            })?;
            if ch.operators() != 2 || arch.group_size() < 2 {
                return Err(Failure::Usage(
                    "--direct-path needs two operators and Gs >= 2".into(),
                ));
            }
            solver::solve_group_two_operator(&ch, &targets, &arch, Some(h_rt))?
        }
        None => solver::solve(&ch, &targets, &arch)?,
    };

    let p_opt = args.tx_power * sol.optimal_power;
    let p_direct = args.tx_power * sol.achieved_power(&ch);
    let dense = sol.theta_dense();
    let identity_gap = max_abs_diff(&dense, &ComplexMatrix::identity(arch.n(), arch.n()));
    println!("branch: {}", sol.branch);
    println!("architecture: {arch}");
    println!("operators: {}", ch.operators());
    println!("tx_power_W: {:.16e}", args.tx_power);
    println!("optimal_power_W: {p_opt:.16e}");
    println!("optimal_power_dBm: {:.6}", dbm(p_opt));
    println!("achieved_power_W: {p_direct:.16e}");
    for (l, r) in sol.constraint_residuals(&ch, &targets).iter().enumerate() {
        println!("residual_d_{}: {r:.3e}", l + 2);
    }
    println!(
        "max_unitarity_deviation: {:.3e}",
        sol.theta.max_unitarity_deviation()
    );
    println!("theta_is_identity: {}", identity_gap <= 1e-12);
    if let Some(path) = &args.theta_out {
        std::fs::write(path, write_theta(&arch, &dense)?)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        println!("theta_written: {}", path.display());
    }
    Ok(())
}
