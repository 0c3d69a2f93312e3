//! Parallel and sequential execution give identical results. Kept in its own
//! binary because the execution mode is process-wide.

use otto_ldf::joint::harmonic_transitions;
use otto_ldf::ldf::{contour_grid, linspace, rate_curve, GridBounds};
use otto_ldf::montecarlo::{sample_blocks, BlockConfig, CycleSampler, Histogram};
use otto_ldf::par::{set_execution, Execution};
use otto_ldf::{BathPair, EngineModel, Expansion, HarmonicCgf, HarmonicEngine, SearchConfig, TwoLevelEngine};

#[test]
fn modes_agree_bit_for_bit() {
    let baths = BathPair::new(3.0, 0.1).unwrap();
    let cgf = HarmonicCgf::new(HarmonicEngine::new(1.0, 2.0, 1.2).unwrap(), baths, Expansion::Exact);
    let bounds = GridBounds {
        gamma1: (-1.0, 1.0),
        gamma2: (-1.0, 1.0),
    };
    let sampler = CycleSampler::new(&EngineModel::from(TwoLevelEngine::new(1.0, 2.0, 0.95).unwrap()), &baths, 1e-12).unwrap();
    let cfg = BlockConfig {
        s: 10,
        blocks: 2000,
        seed: 5,
    };
    let run = || {
        (
            contour_grid(&cgf, &bounds, 31, 29).unwrap(),
            rate_curve(&cgf, &linspace(-0.5, 1.5, 41), &SearchConfig::default()).unwrap(),
            sample_blocks(&sampler, &cfg, Histogram::default_efficiency()).unwrap(),
            harmonic_transitions(1.3, 48).unwrap(),
        )
    };
    set_execution(Execution::Sequential);
    let sequential = run();
    set_execution(Execution::Parallel);
    let parallel = run();
    assert_eq!(sequential.0, parallel.0);
    assert_eq!(sequential.1, parallel.1);
    assert_eq!(sequential.2, parallel.2);
    assert_eq!(sequential.3, parallel.3);
}
