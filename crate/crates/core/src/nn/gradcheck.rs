use super::mlp::{Grads, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub worst_rel_err: f64,
    /// Human-readable location of the worst parameter, e.g. `layer 1 bias[0]`.
    pub worst_param: String,
    pub worst_layer: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn param_mut(net: &mut Mlp, layer: usize, is_weight: bool, i: usize) -> &mut f64 {
    if is_weight {
        &mut net.weights_mut(layer)[i]
    } else {
        &mut net.biases_mut(layer)[i]
    }
}

/// Compares `analytic` against central differences of `loss` with step `h`
/// for every parameter of `net`.
pub fn grad_check(net: &Mlp, loss: impl Fn(&Mlp) -> f64, analytic: &Grads, h: f64, tolerance: f64) -> GradCheckReport {
    let mut probe = net.clone();
    let mut worst = (0.0_f64, String::from("none"), 0usize);
    for l in 0..net.n_layers() {
        for (kind, len) in [("weight", net.weights(l).len()), ("bias", net.biases(l).len())] {
            for i in 0..len {
                let is_weight = kind == "weight";
                let original = *param_mut(&mut probe, l, is_weight, i);
                *param_mut(&mut probe, l, is_weight, i) = original + h;
                let plus = loss(&probe);
                *param_mut(&mut probe, l, is_weight, i) = original - h;
                let minus = loss(&probe);
                *param_mut(&mut probe, l, is_weight, i) = original;
                let numeric = (plus - minus) / (2.0 * h);
                let a = if is_weight { analytic.weights[l][i] } else { analytic.biases[l][i] };
                let err = relative_error(a, numeric);
                if err > worst.0 || err.is_nan() {
                    worst = (err, format!("layer {l} {kind}[{i}]"), l);
                }
            }
        }
    }
    GradCheckReport {
        passed: worst.0 < tolerance,
        worst_rel_err: worst.0,
        worst_param: worst.1,
        worst_layer: worst.2,
    }
}
