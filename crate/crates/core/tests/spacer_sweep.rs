use sspd_core::optics::{stack_response, Layer, LayerStack};

fn nbn_absorption(spacer_nm: f64, wavelength_nm: f64) -> f64 {
    let mut stack = LayerStack::paper_default();
    let silica = stack.layers[1].dispersion.clone();
    stack.layers[1] = Layer::continuous(silica, spacer_nm).unwrap();
    stack_response(&stack, wavelength_nm).unwrap().absorption_per_layer[0]
}

#[test]
fn spacer_thickness_near_first_optimum_at_700nm() {
    let thicknesses: Vec<f64> = (0..=400).map(f64::from).collect();
    let a: Vec<f64> = thicknesses.iter().map(|&d| nbn_absorption(d, 700.0)).collect();
    let first_peak = (1..a.len() - 1).find(|&i| a[i] >= a[i - 1] && a[i] >= a[i + 1]).unwrap();
    assert!((100.0..=180.0).contains(&thicknesses[first_peak]), "first optimum at {} nm", thicknesses[first_peak]);
    assert!(nbn_absorption(160.0, 700.0) >= 0.75 * a[first_peak]);
    // Cavity response repeats with period lambda / (2 n_SiO2), about 240 nm.
    let second_peak = (first_peak + 50..a.len() - 1)
        .find(|&i| a[i] >= a[i - 1] && a[i] >= a[i + 1])
        .unwrap();
    let period = thicknesses[second_peak] - thicknesses[first_peak];
    assert!((200.0..=280.0).contains(&period), "period {period} nm");
}

#[test]
fn spacer_free_stack_absorbs_less_than_cavity() {
    assert!(nbn_absorption(0.0, 700.0) < nbn_absorption(160.0, 700.0));
}
