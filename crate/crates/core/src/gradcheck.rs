//! Central finite-difference gradient checking against the tape.

use crate::autograd::{Tape, Var};
use crate::params::{GradStore, Matrix, ParamStore};

#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Relative error per parameter, by name.
    pub params: Vec<(String, f64)>,
    /// Relative error of the gradient with respect to the input.
    pub input: f64,
}

impl GradCheck {
    pub fn max_error(&self) -> f64 {
        self.params
            .iter()
            .map(|(_, e)| *e)
            .fold(self.input, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.params
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).mapv(|x| x * x).sum().sqrt();
    let scale = a.mapv(|x| x * x).sum().sqrt() + b.mapv(|x| x * x).sum().sqrt();
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Gradients whose analytic and numeric norms both fall below this value
/// are treated as matching; their relative error is pure rounding noise.
pub const VANISHING_NORM: f64 = 1e-7;

fn matrix_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    let norm = |m: &Matrix| m.mapv(|x| x * x).sum().sqrt();
    if norm(analytic) + norm(numeric) < VANISHING_NORM {
        0.0
    } else {
        relative_error(analytic, numeric)
    }
}

/// Compares tape gradients of the scalar built by `f` with central
/// differences, for every trainable parameter in `store` and for `input`.
pub fn check<F>(store: &mut ParamStore, input: &Matrix, eps: f64, f: F) -> GradCheck
where
    F: Fn(&mut Tape<'_>, Var) -> Var,
{
    let eval = |store: &ParamStore, x: &Matrix| -> f64 {
        let mut tape = Tape::new(store);
        let xv = tape.input(x.clone());
        let out = f(&mut tape, xv);
        tape.scalar(out)
    };

    let (analytic, analytic_input) = {
        let mut tape = Tape::new(store);
        let xv = tape.input(input.clone());
        let out = f(&mut tape, xv);
        let grads = tape.backward(out);
        let mut gs = GradStore::new(store);
        tape.accumulate_params(&grads, &mut gs);
        let gi = grads
            .wrt(xv)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(input.dim()));
        (gs, gi)
    };

    let mut params = Vec::new();
    for id in store.ids().collect::<Vec<_>>() {
        if !store.param(id).trainable {
            continue;
        }
        let shape = store.get(id).dim();
        let mut numeric = Matrix::zeros(shape);
        for idx in 0..store.get(id).len() {
            let pos = (idx / shape.1, idx % shape.1);
            let orig = store.get(id)[pos];
            store.get_mut(id)[pos] = orig + eps;
            let plus = eval(store, input);
            store.get_mut(id)[pos] = orig - eps;
            let minus = eval(store, input);
            store.get_mut(id)[pos] = orig;
            numeric[pos] = (plus - minus) / (2.0 * eps);
        }
        let a = analytic
            .get(id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape));
        params.push((store.param(id).name.clone(), matrix_error(&a, &numeric)));
    }

    let mut numeric_input = Matrix::zeros(input.dim());
    let mut x = input.clone();
    for idx in 0..x.len() {
        let pos = (idx / x.ncols(), idx % x.ncols());
        let orig = x[pos];
        x[pos] = orig + eps;
        let plus = eval(store, &x);
        x[pos] = orig - eps;
        let minus = eval(store, &x);
        x[pos] = orig;
        numeric_input[pos] = (plus - minus) / (2.0 * eps);
    }

    GradCheck {
        params,
        input: matrix_error(&analytic_input, &numeric_input),
    }
}
