use shapeopt::fem::Dofs;
use shapeopt::flow::{assemble_linearized, primal_constraints, FluidProperties, Linearization};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::Vec2;
use std::time::Instant;

#[test]
fn assembly_vs_solve() {
    let mesh = channel_with_obstacle(&ChannelSpec {
        length: 50.0,
        height: 10.0,
        obstacle: Obstacle::Circle { diameter: 1.0 },
        target_cells: 3000,
    })
    .unwrap();
    let props = FluidProperties { density: 1.0, viscosity: 1.0, inflow: Vec2::new(1.0, 0.0) };
    let dofs = Dofs::new(&mesh);
    let v = vec![Vec2::new(1.0, 0.0); dofs.n_vel_nodes()];

    let t = Instant::now();
    let mut sys = assemble_linearized(&mesh, &dofs, &props, &v, Linearization::Picard);
    println!("assemble: {:.3}s, triplets: {}", t.elapsed().as_secs_f64(), sys.triplets().len());

    let t = Instant::now();
    let bc = primal_constraints(&mesh, &dofs, &props).unwrap();
    sys.apply_constraints(&bc);
    println!("constraints: {:.3}s, triplets: {}", t.elapsed().as_secs_f64(), sys.triplets().len());

    let t = Instant::now();
    let (_x, res) = sys.solve(1e-13, 4).unwrap();
    println!("solve: {:.3}s (res {:.2e}, n={})", t.elapsed().as_secs_f64(), res, sys.n);

    let t = Instant::now();
    let (_x, _res) = sys.solve(1e-13, 4).unwrap();
    println!("solve again: {:.3}s", t.elapsed().as_secs_f64());
}
