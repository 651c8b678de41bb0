//! Runs the default acceptance scene once and prints the resolution,
//! contrast, and uniformity measurements for both imaging modes.
//!
//! Usage: scene_probe [seed]

use std::time::Instant;
use wavecor::beamform::{beamform, BeamformConfig};
use wavecor::metrics::{fwhm_lateral, gcnr, peak_position, sharpness, GcnrMode};
use wavecor::scenes;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let t = Instant::now();
    let (channel, medium) = scenes::scene_channel::<f32>(seed).unwrap();
    eprintln!(
        "simulate seed {seed}: {:.1?} ({} rejected)",
        t.elapsed(),
        channel.rejected_scatterers()
    );
    let grid = scenes::scene_image_grid::<f32>();

    let t = Instant::now();
    let wci = beamform(&channel, &grid, None, &BeamformConfig::wci()).unwrap();
    eprintln!("wci beamform: {:.1?}", t.elapsed());
    let t = Instant::now();
    let hwci = beamform(&channel, &grid, Some(&medium), &BeamformConfig::hwci()).unwrap();
    eprintln!("hwci beamform: {:.1?}", t.elapsed());

    for (label, img) in [("wci", &wci), ("hwci", &hwci)] {
        wavecor::io::write_pgm(
            std::path::Path::new(&format!("/tmp/probe_{label}_{seed}.pgm")),
            img,
            40.0,
        )
        .unwrap();
    }

    let mut widths = [Vec::new(), Vec::new()];
    println!("pin  mode   fwhm_mm  x_mm     z_mm     pos_err_um");
    for &pz in &scenes::SCENE_PIN_DEPTHS {
        for (k, (label, img)) in [("wci", &wci), ("hwci", &hwci)].iter().enumerate() {
            let w = scenes::pin_window::<f32>(pz);
            let fw = fwhm_lateral(img, Some(w)).unwrap();
            let (px, pzm) = peak_position(img, Some(w)).unwrap();
            let err = ((px as f64).powi(2) + (pzm as f64 - pz).powi(2)).sqrt();
            widths[k].push(fw as f64);
            println!(
                "{:4.0} {label:5} {:8.3} {:8.3} {:8.3} {:10.1}",
                pz * 1e3,
                fw * 1e3,
                px * 1e3,
                pzm * 1e3,
                err * 1e6
            );
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cv = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt() / m
    };
    let (mw, mh) = (mean(&widths[0]), mean(&widths[1]));
    println!("mean fwhm wci {:.3} mm, hwci {:.3} mm, improvement {:.1} %", mw * 1e3, mh * 1e3, (mw - mh) / mw * 100.0);
    println!("cv wci {:.3}, hwci {:.3}", cv(&widths[0]), cv(&widths[1]));

    let inside = scenes::lesion_region::<f32>();
    let outside = scenes::lesion_background_region::<f32>();
    for (label, img) in [("wci", &wci), ("hwci", &hwci)] {
        let g = gcnr(img, &inside, &outside, GcnrMode::RankBased).unwrap();
        let s = sharpness(img).unwrap();
        println!("{label}: gcnr {:.4} (degenerate {}), sharpness {:.4e}", g.value, g.degenerate, s);
    }
}
