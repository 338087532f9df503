//! Loads a scene, prints its layout and evaluates BS and panel array
//! responses for a few directions.
//!
//! ```text
//! cargo run --example scene_and_array -- [SCENE]
//! ```

use ems_charting::scene::{array_response, load_scene, AngularPair};

fn main() -> ems_charting::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "toy_canyon".into());
    let scene = load_scene(&path)?;

    println!("scene {path}");
    println!("  wavelength        {:.4} m", scene.wavelength);
    println!("  tx / noise power  {:.3e} W / {:.3e} W", scene.tx_power, scene.noise_power);
    println!("  BS at {:?}, {} antennas", scene.bs_position.as_slice(), scene.num_bs_antennas());
    println!("  {} blockers, {} test points", scene.blockers.len(), scene.num_test_points());
    for (j, p) in scene.panels.iter().enumerate() {
        println!(
            "  panel {}: center {:?}, normal [{:.3}, {:.3}, {:.3}], {} x {} elements at {:.2} mm",
            j + 1,
            p.center().as_slice(),
            p.normal().x,
            p.normal().y,
            p.normal().z,
            p.l_x(),
            p.l_y(),
            p.d_x() * 1e3
        );
    }

    // A steering vector has unit-modulus entries; its inner product with
    // another direction's vector shows the array's angular selectivity.
    let bs = &scene.bs_array;
    let boresight = bs.frame().normal;
    let reference = array_response(bs, AngularPair::from_direction(&boresight), scene.wavelength)?;
    println!("\nBS beam pattern around boresight (|a(0)^H a(phi)| / N):");
    for deg in [0.0_f64, 5.0, 10.0, 20.0, 40.0] {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), deg.to_radians());
        let a = array_response(bs, AngularPair::from_direction(&(rot * boresight)), scene.wavelength)?;
        let c: num_complex::Complex64 = reference.iter().zip(&a).map(|(x, y)| x.conj() * y).sum();
        println!("  {deg:5.1} deg  {:.3}", c.norm() / bs.len() as f64);
    }
    Ok(())
}
