//! Porosity, phase fractions, slice trend, pore size distribution and REV
//! curve of a sphere-pack phantom.
//!
//! cargo run --release --example petrophysics -- [voxel_size_um]

use geoseg::petrophysics::{
    pore_size_distribution, porosity, porosity_trend, rev_curve, volume_fractions, PsdParams, RevOptions,
};
use geoseg::synthetic::{random_spheres, sphere_labels};
use geoseg::{Dims, Roi};

fn main() -> anyhow::Result<()> {
    let voxel: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.74);
    let d = Dims::new(96, 96, 96);
    let spheres = random_spheres(d, 220, 3.0, 8.0, 1.0, 21)?;
    // spheres never cross the border, so the outer shell is pore-free; keep the interior
    let labels = sphere_labels(d, &spheres, 1, 2)?.crop(&Roi::new(10, 10, 10, 76, 76, 76))?;

    println!("porosity {:.4}", porosity(&labels, 1)?);
    println!("fractions {:?}", volume_fractions(&labels)?);

    let trend = porosity_trend(&labels, 1)?;
    println!(
        "slice porosity {:.4} +- {:.4}, slope {:.2e} per slice, R^2 {:.3}",
        trend.mean, trend.std, trend.slope, trend.r_squared
    );

    let psd = pore_size_distribution(&labels, 1, voxel, &PsdParams::default())?;
    println!(
        "{} pore regions ({} spheres placed in the full cube), mean diameter {:.2} +- {:.2} um",
        psd.count,
        spheres.len(),
        psd.mean,
        psd.std
    );

    let edges = [8, 16, 24, 32, 40, 48, 56, 64, 76];
    let rev = rev_curve(&labels, 1, &edges, &RevOptions { band: 0.02, ..RevOptions::default() })?;
    for s in &rev.samples {
        println!("  edge {:>3}: porosity {:.4} ({:?})", s.edge, s.porosity, s.region);
    }
    match rev.stable_from {
        Some(e) => println!("porosity settles within 0.02 of {:.4} from edge {e}", rev.full_porosity),
        None => println!("porosity never settles within 0.02"),
    }
    Ok(())
}
