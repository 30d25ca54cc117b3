use faer::prelude::*;
use faer::sparse::SparseColMat;
use shapeopt::fem::Dofs;
use shapeopt::flow::{assemble_linearized, primal_constraints, FluidProperties, Linearization};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::Vec2;
use std::time::Instant;

#[test]
fn symbolic_vs_numeric() {
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
    let mut sys = assemble_linearized(&mesh, &dofs, &props, &v, Linearization::Picard);
    let bc = primal_constraints(&mesh, &dofs, &props).unwrap();
    sys.apply_constraints(&bc);

    let t = Instant::now();
    let trip: Vec<_> = sys.triplets().to_vec();
    let a = SparseColMat::try_new_from_triplets(sys.n, sys.n, &trip).unwrap();
    println!("to CSC: {:.3}s (nnz {})", t.elapsed().as_secs_f64(), a.compute_nnz());

    faer::set_global_parallelism(faer::Par::Seq);
    let t = Instant::now();
    let sym = faer::sparse::linalg::solvers::SymbolicLu::try_new(a.symbolic()).unwrap();
    println!("symbolic: {:.3}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let lu = faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(sym.clone(), a.as_ref()).unwrap();
    println!("numeric: {:.3}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let _lu2 = faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(sym.clone(), a.as_ref()).unwrap();
    println!("numeric again: {:.3}s", t.elapsed().as_secs_f64());

    let b = Mat::from_fn(sys.n, 1, |i, _| sys.rhs[i]);
    let t = Instant::now();
    let _x = lu.solve(&b);
    println!("triangular solve: {:.3}s", t.elapsed().as_secs_f64());
}
