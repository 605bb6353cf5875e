use std::f64::consts::PI;

pub fn hamming(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Power spectrum bins 0..=512 of one windowed frame by direct summation.
pub fn direct_power(frame: &[f64]) -> Vec<f64> {
    let w = hamming(frame.len());
    (0..=512)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, (&x, &wn)) in frame.iter().zip(&w).enumerate() {
                let ph = -2.0 * PI * (k * n) as f64 / 1024.0;
                re += x * wn * ph.cos();
                im += x * wn * ph.sin();
            }
            re * re + im * im
        })
        .collect()
}

pub fn mfcc_oracle(frame: &[f64]) -> Vec<f64> {
    let power = direct_power(frame);
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let imel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(8000.0);
    let pts: Vec<f64> = (0..28).map(|j| imel(top * j as f64 / 27.0)).collect();
    let mut log_e = Vec::new();
    for m in 0..26 {
        let mut e = 0.0;
        for (k, &p) in power.iter().enumerate() {
            let f = k as f64 * 16_000.0 / 1024.0;
            let w = if f >= pts[m] && f <= pts[m + 1] {
                (f - pts[m]) / (pts[m + 1] - pts[m])
            } else if f > pts[m + 1] && f <= pts[m + 2] {
                (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
            } else {
                0.0
            };
            e += w * p;
        }
        log_e.push(e.max(1e-10).ln());
    }
    (1..=13)
        .map(|n| {
            (2.0f64 / 26.0).sqrt()
                * log_e
                    .iter()
                    .enumerate()
                    .map(|(m, &v)| v * (PI * n as f64 * (m as f64 + 0.5) / 26.0).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Solves the normal equations `R a = r` by Gaussian elimination with partial pivoting.
pub fn dense_lpc(r: &[f64], order: usize) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = (0..order)
        .map(|i| {
            let mut row: Vec<f64> = (0..order).map(|j| r[(i as isize - j as isize).unsigned_abs()]).collect();
            row.push(r[i + 1]);
            row
        })
        .collect();
    for col in 0..order {
        let piv = (col..order).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for row in 0..order {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..=order {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    (0..order).map(|i| m[i][order] / m[i][i]).collect()
}

pub fn time_autocorrelation(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let w = hamming(frame.len());
    let x: Vec<f64> = frame.iter().zip(&w).map(|(a, b)| a * b).collect();
    (0..=max_lag)
        .map(|k| (0..x.len() - k).map(|n| x[n] * x[n + k]).sum())
        .collect()
}

pub fn cepstrum_oracle(a: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    for m in 1..=n {
        let am = if m <= a.len() { a[m - 1] } else { 0.0 };
        let mut s = am;
        for k in 1..m {
            if m - k <= a.len() {
                s += (k as f64 / m as f64) * c[k] * a[m - k - 1];
            }
        }
        c[m] = s;
    }
    c[1..].to_vec()
}

/// Staged reference for one power spectrum: Bark integration, equal loudness,
/// floor and cube root with copied edges, cosine transform, LPC, cepstra.
pub struct PlpOracle {
    pub bark: Vec<f64>,
    pub loud: Vec<f64>,
    pub compressed: Vec<f64>,
    pub autocorr: Vec<f64>,
    pub lpc: Vec<f64>,
    pub cepstra: Vec<f64>,
}

pub fn plp_oracle(power: &[f64]) -> PlpOracle {
    let bark = |f: f64| 6.0 * ((f / 600.0) + ((f / 600.0).powi(2) + 1.0).sqrt()).ln();
    let nyq = bark(8000.0);
    let m = nyq.ceil() as usize + 1;
    let step = nyq / (m - 1) as f64;
    let mask = |dz: f64| {
        if dz < -1.3 {
            0.0
        } else if dz <= -0.5 {
            10f64.powf(2.5 * (dz + 0.5))
        } else if dz <= 0.5 {
            1.0
        } else if dz <= 2.5 {
            10f64.powf(-1.0 * (dz - 0.5))
        } else {
            0.0
        }
    };
    let energies: Vec<f64> = (0..m)
        .map(|b| {
            power
                .iter()
                .enumerate()
                .map(|(k, &p)| p * mask(bark(k as f64 * 16_000.0 / 1024.0) - b as f64 * step))
                .sum()
        })
        .collect();
    let loud: Vec<f64> = energies
        .iter()
        .enumerate()
        .map(|(b, &e)| {
            let z = b as f64 * step;
            let f = 600.0 * (z / 6.0).sinh();
            let w2 = (2.0 * PI * f).powi(2);
            let eql = (w2 + 56.8e6) * w2 * w2 / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9));
            (e * eql).max(1e-10)
        })
        .collect();
    let mut compressed: Vec<f64> = loud.iter().map(|v| v.powf(1.0 / 3.0)).collect();
    compressed[0] = compressed[1];
    compressed[m - 1] = compressed[m - 2];
    // even extension to 2(m-1) points, then a real inverse DFT
    let n = 2 * (m - 1);
    let ext: Vec<f64> = (0..n).map(|j| if j < m { compressed[j] } else { compressed[n - j] }).collect();
    let autocorr: Vec<f64> = (0..=12)
        .map(|k| ext.iter().enumerate().map(|(j, &y)| y * (2.0 * PI * (j * k) as f64 / n as f64).cos()).sum::<f64>() / n as f64)
        .collect();
    let lpc = dense_lpc(&autocorr, 12);
    let cepstra = cepstrum_oracle(&lpc, 13);
    PlpOracle {
        bark: energies,
        loud,
        compressed,
        autocorr,
        lpc,
        cepstra,
    }
}
