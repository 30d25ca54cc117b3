use shapeopt::deform::PLaplaceConfig;
use shapeopt::flow::{FluidProperties, SolverConfig};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::optimizer::{run_augmented_lagrange, OptimizerConfig, SolverConfigs};
use shapeopt::sensitivity::AugLagState;
use shapeopt::Vec2;

#[test]
fn hundred_step_traj() {
    for p in [2.0f64, 4.0] {
        let mesh = channel_with_obstacle(&ChannelSpec {
            length: 50.0, height: 10.0,
            obstacle: Obstacle::Circle { diameter: 1.0 },
            target_cells: 3000,
        }).unwrap();
        let al = AugLagState::new(mesh.barycenter(), mesh.volume());
        let cfgs = SolverConfigs {
            props: FluidProperties { density: 1.0, viscosity: 1.0, inflow: Vec2::new(1.0, 0.0) },
            flow: SolverConfig::default(),
            plaplace: PLaplaceConfig::with_exponent(p),
        };
        let mut cfg = OptimizerConfig::new(al);
        cfg.max_total_steps = 100;
        let t0 = std::time::Instant::now();
        let (_mesh, hist, _al) = run_augmented_lagrange(mesh, &cfg, &cfgs, None).unwrap();
        println!("p={p} wall={:.0}s", t0.elapsed().as_secs_f64());
        for r in hist.rows.iter().filter(|r| r.step % 10 == 0 || r.step == hist.rows.len()-1) {
            println!("  p={p} step {:3}: J/J0={:.5} tip={:.1} a/b={:.3} maxAR={:.2} minAng={:.1} gmax={:.2}",
                r.step, r.j_over_j0, r.tip_angle, r.half_axis_ratio, r.max_aspect_ratio, r.min_angle, r.gamma_inf);
        }
    }
}
