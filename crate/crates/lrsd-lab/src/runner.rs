//! Parallel ensemble execution. Trajectories are independent and seeded by
//! index, so results do not depend on the worker count.

use lrsd_core::circuits::{run_trajectory, TrajectoryRecord};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{LabError, Result};

pub const THREADS_ENV: &str = "LRSD_LAB_THREADS";

/// `--threads` wins, then `LRSD_LAB_THREADS`, then the logical core count.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n == 0 { Err(LabError::Config("--threads must be positive".into())) } else { Ok(n) };
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(LabError::Config(format!("{THREADS_ENV} = `{v}` is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `0..n` on a pool of `threads` workers, in index order.
pub fn par_map<T, F>(n: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

pub fn run_ensemble(cfg: &RunConfig, threads: usize) -> Result<Vec<TrajectoryRecord>> {
    cfg.validate()?;
    let circuit = cfg.circuit();
    par_map(cfg.n_traj as u64, threads, |i| run_trajectory(&circuit, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelName;

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = RunConfig::new(ModelName::ZBasisMagic, 6);
        cfg.eta = 1.0;
        cfg.n_traj = 12;
        cfg.seed = 5;
        let one = run_ensemble(&cfg, 1).unwrap();
        let four = run_ensemble(&cfg, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.iter().map(|r| r.index).collect::<Vec<_>>(), (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(resolve_threads(Some(0)).is_err());
        assert_eq!(resolve_threads(Some(3)).unwrap(), 3);
    }
}
