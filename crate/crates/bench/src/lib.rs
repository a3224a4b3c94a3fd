//! Shared fixtures for the criterion benchmarks.

use ngdrate_core::data::generate;
use ngdrate_core::model::sample_teacher;
use ngdrate_core::{Dataset, NoiseKind, ScheduleConfig, TeacherSpec};

/// A schedule, a unit-norm teacher and `n` noisy samples in dimension `d`.
pub fn fixture(d: usize, width: usize, n: usize) -> (ScheduleConfig, TeacherSpec, Dataset) {
    let schedule = ScheduleConfig::new(d, 1.0, 1.0, 1.0, 1.0, 3.0).expect("valid schedule");
    let teacher = sample_teacher(&schedule, width, 1.0, 7).expect("teacher");
    let data = generate(&teacher, n, 0.3, NoiseKind::Uniform, 11).expect("data");
    (schedule, teacher, data)
}
