//! Reference columns of the published index tables.

// Bernoulli rows are ordered by `Ψ = 1..6`, then `κ - Ψ = 1..6`.
pub const BERNOULLI_CALIBRATION: [f64; 36] = [
    0.641, 0.443, 0.332, 0.263, 0.216, 0.183, 0.760, 0.590, 0.476, 0.398, 0.340, 0.296, 0.816, 0.671, 0.566, 0.487,
    0.427, 0.379, 0.849, 0.725, 0.628, 0.552, 0.491, 0.443, 0.872, 0.762, 0.674, 0.602, 0.543, 0.494, 0.888, 0.790,
    0.709, 0.641, 0.585, 0.537,
];
pub const BERNOULLI_K1: [f64; 36] = [
    0.643, 0.447, 0.338, 0.270, 0.224, 0.191, 0.760, 0.592, 0.480, 0.402, 0.345, 0.301, 0.816, 0.673, 0.568, 0.490,
    0.430, 0.383, 0.850, 0.726, 0.629, 0.554, 0.494, 0.446, 0.873, 0.763, 0.675, 0.604, 0.545, 0.497, 0.889, 0.791,
    0.710, 0.643, 0.586, 0.539,
];
pub const BERNOULLI_K2: [f64; 36] = [
    0.642, 0.446, 0.337, 0.268, 0.222, 0.189, 0.760, 0.591, 0.479, 0.401, 0.344, 0.300, 0.816, 0.673, 0.568, 0.489,
    0.429, 0.382, 0.849, 0.725, 0.629, 0.554, 0.494, 0.445, 0.872, 0.763, 0.675, 0.603, 0.545, 0.496, 0.888, 0.791,
    0.710, 0.642, 0.586, 0.538,
];
pub const BERNOULLI_K3: [f64; 36] = [
    0.642, 0.445, 0.335, 0.267, 0.221, 0.188, 0.760, 0.591, 0.478, 0.400, 0.342, 0.299, 0.816, 0.672, 0.567, 0.489,
    0.428, 0.381, 0.849, 0.725, 0.629, 0.553, 0.493, 0.444, 0.872, 0.762, 0.674, 0.603, 0.544, 0.496, 0.888, 0.791,
    0.709, 0.642, 0.586, 0.538,
];
pub const BERNOULLI_LIMIT: [f64; 36] = [
    0.641, 0.442, 0.332, 0.264, 0.218, 0.185, 0.759, 0.590, 0.476, 0.398, 0.340, 0.297, 0.815, 0.671, 0.566, 0.487,
    0.427, 0.379, 0.849, 0.724, 0.628, 0.552, 0.492, 0.443, 0.871, 0.762, 0.673, 0.602, 0.543, 0.495, 0.887, 0.790,
    0.709, 0.641, 0.585, 0.537,
];

// Gaussian rows are `κ = 1..10, 20, 30, 40, 50` at `Ψ = 0`.
pub const GAUSSIAN_CALIBRATION: [f64; 14] =
    [0.505, 0.308, 0.226, 0.179, 0.149, 0.128, 0.112, 0.100, 0.090, 0.082, 0.043, 0.029, 0.022, 0.018];
pub const GAUSSIAN_K1: [f64; 14] =
    [0.526, 0.329, 0.245, 0.196, 0.164, 0.142, 0.125, 0.112, 0.101, 0.092, 0.050, 0.034, 0.026, 0.021];
