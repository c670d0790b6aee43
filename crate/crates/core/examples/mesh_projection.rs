// Ray-cast meshes onto the sphere: distance to the farthest hit and the
// sine of the ray/normal angle.

use sphconv::mesh::{mesh_to_sphere, TriangleMesh};
use sphconv::synth::random_star_mesh;
use sphconv::Bandwidth;

fn summary(name: &str, mesh: &TriangleMesh, b: Bandwidth) -> sphconv::Result<()> {
    let rep = mesh_to_sphere(mesh, b)?;
    let n = rep.signal.channel(0).len();
    let stats = |c: usize| {
        let v = rep.signal.channel(c);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi, v.iter().sum::<f64>() / n as f64)
    };
    let (d, s) = (stats(0), stats(1));
    println!(
        "{name:<12} faces {:>5}  radius {:.3}  distance [{:.3}, {:.3}] mean {:.3}  sin(alpha) [{:.3}, {:.3}]",
        mesh.faces().len(),
        rep.radius,
        d.0,
        d.1,
        d.2,
        s.0,
        s.1
    );
    Ok(())
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let b = Bandwidth::new(16)?;
    summary("icosphere", &TriangleMesh::icosphere(3), b)?;
    summary("cube", &TriangleMesh::cube(1.0), b)?;
    summary("tetrahedron", &TriangleMesh::tetrahedron(), b)?;
    let star = random_star_mesh(3);
    summary("star", &star, b)?;
    summary("star x10", &star.scaled(10.0), b)?;

    let off = TriangleMesh::tetrahedron().to_off();
    let parsed = TriangleMesh::from_off(&off)?;
    println!("OFF round trip keeps {} vertices and {} faces", parsed.vertices().len(), parsed.faces().len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
