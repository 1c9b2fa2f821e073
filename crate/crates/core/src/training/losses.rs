use crate::nn::Scalar;
use crate::{Error, Result};

/// A summed loss with its gradient w.r.t. the predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Loss<T> {
    /// Sum over contributing cells.
    pub value: f64,
    /// Number of contributing cells.
    pub count: usize,
    pub grad: Vec<T>,
}

impl<T> Loss<T> {
    /// Loss normalized by the number of contributing cells (0 when none).
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.value / self.count as f64
        }
    }
}

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a} vs {b} cells")));
    }
    Ok(())
}

/// Sum of squared errors over cells with `m` set; masked cells contribute
/// neither loss nor gradient.
pub fn masked_l2_loss<T: Scalar>(m: &[bool], y: &[T], y_pred: &[T]) -> Result<Loss<T>> {
    check_len("mask and target", m.len(), y.len())?;
    check_len("mask and prediction", m.len(), y_pred.len())?;
    let mut value = 0.0;
    let mut count = 0;
    let mut grad = vec![T::zero(); m.len()];
    for i in 0..m.len() {
        if m[i] {
            let d = y_pred[i] - y[i];
            value += (d * d).to_f64().unwrap_or(f64::NAN);
            grad[i] = d + d;
            count += 1;
        }
    }
    Ok(Loss { value, count, grad })
}

/// Class-weighted softmax cross entropy over valid cells. `logits` holds the
/// no-rain plane followed by the rain plane; the gradient has the same layout.
pub fn weighted_ce_loss<T: Scalar>(
    m: &[bool],
    rain_labels: &[bool],
    logits: &[T],
    class_weights: [f64; 2],
) -> Result<Loss<T>> {
    let n = m.len();
    check_len("mask and labels", n, rain_labels.len())?;
    check_len("two logit planes", 2 * n, logits.len())?;
    if class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Config(format!("class weights must be positive, got {class_weights:?}")));
    }
    let (no, yes) = logits.split_at(n);
    let mut value = 0.0;
    let mut count = 0;
    let mut grad = vec![T::zero(); 2 * n];
    for i in 0..n {
        if !m[i] {
            continue;
        }
        let (a, b) = (no[i], yes[i]);
        let mx = if a > b { a } else { b };
        let (ea, eb) = ((a - mx).exp(), (b - mx).exp());
        let lse = mx + (ea + eb).ln();
        let (p_no, p_yes) = (ea / (ea + eb), eb / (ea + eb));
        let label = usize::from(rain_labels[i]);
        let w = T::of(class_weights[label]);
        let target = if label == 1 { b } else { a };
        value += (w * (lse - target)).to_f64().unwrap_or(f64::NAN);
        let (t_no, t_yes) = if label == 1 { (T::zero(), T::one()) } else { (T::one(), T::zero()) };
        grad[i] = w * (p_no - t_no);
        grad[n + i] = w * (p_yes - t_yes);
        count += 1;
    }
    Ok(Loss { value, count, grad })
}

/// Weighted squared error on rain cells. `sample_weights` lists one weight
/// per set cell of `m_rain`, in cell order.
pub fn lds_weighted_regression_loss<T: Scalar>(
    m_rain: &[bool],
    z: &[T],
    z_pred: &[T],
    sample_weights: &[T],
) -> Result<Loss<T>> {
    check_len("rain mask and target", m_rain.len(), z.len())?;
    check_len("rain mask and prediction", m_rain.len(), z_pred.len())?;
    let rain = m_rain.iter().filter(|&&r| r).count();
    if rain != sample_weights.len() {
        return Err(Error::Invalid(format!(
            "{} sample weights for {rain} rain cells",
            sample_weights.len()
        )));
    }
    let mut weights = sample_weights.iter();
    let mut value = 0.0;
    let mut grad = vec![T::zero(); m_rain.len()];
    for i in 0..m_rain.len() {
        if m_rain[i] {
            let w = *weights.next().expect("counted above");
            let d = z_pred[i] - z[i];
            value += (w * d * d).to_f64().unwrap_or(f64::NAN);
            grad[i] = w * (d + d);
        }
    }
    Ok(Loss {
        value,
        count: rain,
        grad,
    })
}
