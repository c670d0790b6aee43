// Recover a planted rotation between two copies of a shape by maximizing
// their SO(3) correlation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphconv::align::{align_shapes, Search};
use sphconv::synth::random_star_mesh;
use sphconv::{Bandwidth, RotationZYZ};

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let b = Bandwidth::new(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..5 {
        let mesh = random_star_mesh(seed);
        let truth = RotationZYZ::random(&mut rng);
        let result = align_shapes(&mesh, &mesh.rotated(&truth), b, None, "input", &Search::default())?
            .with_ground_truth(&truth);
        println!(
            "shape {seed}: found (a, b, g) = ({:.3}, {:.3}, {:.3}), error {:.2} deg, score {:.4}",
            result.rotation.alpha,
            result.rotation.beta,
            result.rotation.gamma,
            result.angular_error.unwrap_or(f64::NAN),
            result.score
        );
    }

    let sphere = sphconv::mesh::TriangleMesh::icosphere(2);
    let flat = align_shapes(&sphere, &sphere, Bandwidth::new(8)?, None, "input", &Search::default())?;
    println!("sphere against itself flagged degenerate: {}", flat.degenerate);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
