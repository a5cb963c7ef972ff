//! Frozen reference values shared by the integration suites.
#![allow(dead_code)]

use std::path::PathBuf;

pub fn stanford_csv() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/stanford_heart.csv")
}

/// Reference transition-probability table for the heart model: for each
/// (age, year, surgery) combination, rows P0/P1/P2 over horizons of
/// 1, 3, 6, 12, 36 months.
pub const HEART_COMBOS: [(f64, f64, f64); 8] = [
    (30.0, 3.0, 0.0),
    (30.0, 3.0, 1.0),
    (30.0, 5.0, 0.0),
    (30.0, 5.0, 1.0),
    (50.0, 3.0, 0.0),
    (50.0, 3.0, 1.0),
    (50.0, 5.0, 0.0),
    (50.0, 5.0, 1.0),
];

pub const HEART_HORIZONS_MONTHS: [f64; 5] = [1.0, 3.0, 6.0, 12.0, 36.0];

pub const HEART_PROBS: [[[f64; 5]; 3]; 8] = [
    [
        [0.6254, 0.2441, 0.0595, 0.0033, 3.5e-08],
        [0.3714, 0.7338, 0.8786, 0.8505, 0.6082],
        [0.0032, 0.0221, 0.0619, 0.1462, 0.3918],
    ],
    [
        [0.6279, 0.2474, 0.0612, 0.0035, 4.1e-08],
        [0.3695, 0.7350, 0.8892, 0.8776, 0.6650],
        [0.0026, 0.0176, 0.0496, 0.1190, 0.3350],
    ],
    [
        [0.6255, 0.2443, 0.0596, 0.0033, 3.5e-08],
        [0.3713, 0.7339, 0.8793, 0.8523, 0.6117],
        [0.0032, 0.0218, 0.0611, 0.1444, 0.3883],
    ],
    [
        [0.6280, 0.2475, 0.0612, 0.0035, 4.2e-08],
        [0.3695, 0.7350, 0.8894, 0.8783, 0.6666],
        [0.0026, 0.0175, 0.0493, 0.1183, 0.3334],
    ],
    [
        [0.5955, 0.2077, 0.0428, 0.0017, 4.5e-09],
        [0.3935, 0.7215, 0.7764, 0.6360, 0.3831],
        [0.0110, 0.0709, 0.1808, 0.3624, 0.6169],
    ],
    [
        [0.6168, 0.2332, 0.0542, 0.0027, 2.0e-08],
        [0.3777, 0.7299, 0.8453, 0.7712, 0.4802],
        [0.0055, 0.0369, 0.1005, 0.2261, 0.5198],
    ],
    [
        [0.5969, 0.2093, 0.0434, 0.0017, 5.0e-09],
        [0.3925, 0.7220, 0.7804, 0.6426, 0.3844],
        [0.0106, 0.0688, 0.1762, 0.3557, 0.6156],
    ],
    [
        [0.6173, 0.2339, 0.0545, 0.0027, 2.0e-08],
        [0.3774, 0.7301, 0.8472, 0.7756, 0.4859],
        [0.0053, 0.0360, 0.0982, 0.2217, 0.5141],
    ],
];

/// Reference expected sojourn (days in the disease stage, year 3, no prior
/// surgery) for ages 30/40/50/60 over the same five horizons.
pub const HEART_SOJOURN_AGES: [f64; 4] = [30.0, 40.0, 50.0, 60.0];
pub const HEART_SOJOURN: [[f64; 5]; 4] = [
    [24.0, 48.3, 60.1, 63.6, 63.9],
    [23.9, 47.6, 58.7, 61.9, 62.1],
    [23.5, 45.6, 55.0, 57.3, 57.4],
    [22.5, 40.5, 46.3, 47.3, 47.3],
];

/// Reference single-transition probabilities (age 30, year 3, no surgery):
/// disease->transplant, disease->death, transplant->death.
pub const HEART_SINGLE: [[f64; 5]; 3] = [
    [0.2726, 0.5338, 0.6296, 0.5866, 0.3434],
    [0.0988, 0.2000, 0.2490, 0.2640, 0.2648],
    [0.0032, 0.0221, 0.0619, 0.1462, 0.3918],
];

/// Reference point estimates as printed, and the half-widths of their print
/// rounding (the box every value consistent with the printed digits lives in).
pub const HEART_THETA_PRINTED: [f64; 9] = [
    4.9e-4, 0.0034, 6.4e-8, 9.3, 0.50, 0.0115, 0.098, -0.02, -0.92,
];
pub const HEART_THETA_HALF: [f64; 9] = [
    0.05e-4, 0.00005, 0.05e-8, 0.05, 0.005, 0.00005, 0.0005, 0.005, 0.005,
];

/// In-box point minimizing the worst table deviation relative to tolerance
/// (2e-3 per probability, 0.5 day per sojourn); found by direct search over
/// the print-rounding box.
pub const HEART_THETA_STAR: [f64; 9] = [
    4.940638e-4,
    3.358607e-3,
    6.450000e-8,
    9.329706,
    0.5050,
    0.01145,
    0.09757670,
    -0.02154220,
    -0.9236595,
];

/// Reference log-likelihoods and likelihood-ratio statistics for the
/// Stanford fit: full model, all-gamma-frozen, b-frozen.
pub const HEART_LOGLIK_FULL: f64 = -885.17;
pub const HEART_LOGLIK_NO_GAMMA: f64 = -896.48;
pub const HEART_LOGLIK_NO_B: f64 = -904.7;
pub const HEART_LRT_GAMMA: f64 = 22.62;
pub const HEART_LRT_B: f64 = 39.06;

/// Reference count-probability table for the cancer example: input cancer
/// stages 0..4, l = 0..2, horizons 6/12/24/36 months.
pub const CANCER_HORIZONS: [f64; 4] = [6.0, 12.0, 24.0, 36.0];
pub const CANCER_COUNT: [[[f64; 4]; 3]; 5] = [
    [
        [0.5382, 0.2885, 0.0814, 0.0226],
        [0.4541, 0.6880, 0.8504, 0.8576],
        [0.0088, 0.0204, 0.0440, 0.0669],
    ],
    [
        [0.2750, 0.0752, 0.0055, 0.0004],
        [0.5199, 0.4422, 0.1960, 0.0952],
        [0.2875, 0.4614, 0.3268, 0.1523],
    ],
    [
        [0.8046, 0.6429, 0.3981, 0.2403],
        [0.1406, 0.2061, 0.2694, 0.2959],
        [0.0639, 0.1173, 0.1483, 0.1552],
    ],
    [
        [0.5219, 0.2701, 0.0698, 0.0175],
        [0.4573, 0.6915, 0.8703, 0.9132],
        [0.0208, 0.0377, 0.0559, 0.0622],
    ],
    [
        [0.0025, 6.04e-6, 3.62e-11, 2.16e-16],
        [0.9975, 0.9999, 0.9998, 0.9998],
        [7.94e-5, 1.31e-4, 1.71e-4, 1.81e-4],
    ],
];

/// Reference expected sojourn in the input stage (months), same stages and
/// horizons; printed to one decimal (integers in the last row).
pub const CANCER_SOJOURN: [[f64; 4]; 5] = [
    [4.5, 6.9, 8.8, 9.4],
    [3.4, 4.3, 4.6, 4.6],
    [5.4, 9.7, 15.9, 19.6],
    [4.4, 6.7, 8.5, 9.0],
    [1.0, 1.0, 1.0, 1.0],
];

/// Reference single-transition probabilities for the cancer example at 6 and
/// 12 months; destination order R, stage 0..4, death.
pub const CANCER_SINGLE: [[[f64; 7]; 2]; 5] = [
    [
        [0.4440, 0.0, 0.0050, 0.0, 0.0, 0.0, 0.0051],
        [0.6750, 0.0, 0.0046, 0.0, 0.0, 0.0, 0.0084],
    ],
    [
        [0.0334, 0.4704, 0.0, 0.0092, 0.0, 0.0, 0.0069],
        [0.0420, 0.3809, 0.0, 0.0104, 0.0, 0.0, 0.0089],
    ],
    [
        [0.0054, 0.0, 0.0592, 0.0, 0.0165, 0.0, 0.0596],
        [0.0096, 0.0, 0.0635, 0.0, 0.0247, 0.0, 0.1084],
    ],
    [
        [4.38e-4, 0.0, 0.0, 0.0078, 0.0, 0.0032, 0.4459],
        [6.58e-4, 0.0, 0.0, 0.0103, 0.0, 0.0021, 0.6784],
    ],
    [
        [9.89e-6, 0.0, 0.0, 0.0, 1.16e-4, 0.0, 0.9973],
        [9.72e-6, 0.0, 0.0, 0.0, 6.049e-5, 0.0, 0.9998],
    ],
];
