use std::ffi::{CStr, CString};
use std::ptr;

use fms::*;

fn last_error() -> String {
    let p = fms_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn config_round_trips_through_json() {
    unsafe {
        let cfg = fms_config_new();
        let key = CString::new("duration").unwrap();
        assert_eq!(fms_config_set(cfg, key.as_ptr(), 12.5), FmsStatus::Ok);
        let json = fms_config_to_json(cfg);
        assert!(!json.is_null());
        let mut back = ptr::null_mut();
        assert_eq!(fms_config_from_json(json, &mut back), FmsStatus::Ok);
        let mut v = 0.0;
        assert_eq!(fms_config_get(back, key.as_ptr(), &mut v), FmsStatus::Ok);
        assert_eq!(v, 12.5);
        let t1 = CString::new("t1").unwrap();
        assert_eq!(fms_config_get(back, t1.as_ptr(), &mut v), FmsStatus::Ok);
        assert_eq!(v, 21.5);
        fms_string_free(json);
        fms_config_free(cfg);
        fms_config_free(back);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    unsafe {
        let cfg = fms_config_new();
        let bad_key = CString::new("no_such_field").unwrap();
        assert_eq!(fms_config_set(cfg, bad_key.as_ptr(), 1.0), FmsStatus::InvalidArgument);
        assert!(last_error().contains("no_such_field"));

        let dur = CString::new("duration").unwrap();
        assert_eq!(fms_config_set(cfg, dur.as_ptr(), 0.0), FmsStatus::Ok);
        assert_eq!(fms_config_validate(cfg), FmsStatus::InvalidConfig);
        assert!(last_error().contains("duration"));
        let mut sim = ptr::null_mut();
        assert_eq!(fms_simulate(cfg, &mut sim), FmsStatus::InvalidConfig);
        assert!(sim.is_null());

        assert_eq!(fms_simulate(ptr::null(), &mut sim), FmsStatus::NullPointer);
        assert_eq!(fms_config_set(ptr::null_mut(), dur.as_ptr(), 1.0), FmsStatus::NullPointer);
        let mut out = ptr::null_mut();
        let bad = CString::new("{ not json").unwrap();
        assert_eq!(fms_config_from_json(bad.as_ptr(), &mut out), FmsStatus::Io);
        let name = CString::new("nope").unwrap();
        assert_eq!(fms_config_preset(name.as_ptr(), &mut out), FmsStatus::InvalidArgument);
        assert_eq!(fms_config_set_damping_time(cfg, -1.0), FmsStatus::InvalidArgument);
        fms_clear_error();
        assert!(fms_last_error().is_null());
        fms_config_free(cfg);
    }
}

#[test]
fn simulation_channels_and_summary() {
    unsafe {
        let name = CString::new("damping").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(fms_config_preset(name.as_ptr(), &mut cfg), FmsStatus::Ok);
        let dur = CString::new("duration").unwrap();
        assert_eq!(fms_config_set(cfg, dur.as_ptr(), 30.0), FmsStatus::Ok);
        let mut sim = ptr::null_mut();
        assert_eq!(fms_simulate(cfg, &mut sim), FmsStatus::Ok);
        let n = fms_simulation_len(sim);
        assert_eq!(n, 6001);
        assert_eq!(fms_simulation_dt(sim), 0.005);

        let mut t = vec![0.0; n];
        let mut pz = vec![0.0; n];
        assert_eq!(fms_simulation_copy(sim, FmsChannel::Time as i32, t.as_mut_ptr(), n), FmsStatus::Ok);
        assert_eq!(fms_simulation_copy(sim, FmsChannel::Pz as i32, pz.as_mut_ptr(), n), FmsStatus::Ok);
        assert_eq!(t[n - 1], 30.0);
        assert!(pz.iter().all(|v| *v > 0.0));
        assert_eq!(
            fms_simulation_copy(sim, FmsChannel::Px as i32, t.as_mut_ptr(), n - 1),
            FmsStatus::BufferTooSmall
        );
        assert_eq!(fms_simulation_copy(sim, 99, t.as_mut_ptr(), n), FmsStatus::InvalidArgument);

        let mut s = FmsRunSummary {
            fitted_rate: 0.0,
            maser_freq: 0.0,
            carrier_amplitude: 0.0,
            sideband_amplitude: 0.0,
        };
        assert_eq!(fms_simulation_summary(sim, &mut s), FmsStatus::Ok);
        let expected = 1.0 / 13.65 + 1.0 / 4.0;
        assert!((s.fitted_rate / expected - 1.0).abs() < 0.01, "{}", s.fitted_rate);
        fms_simulation_free(sim);
        fms_config_free(cfg);
    }
}

#[test]
fn spectrum_of_a_tone() {
    let dt = 0.01;
    let x: Vec<f64> = (0..4000)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 7.3 * i as f64 * dt).cos())
        .collect();
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(
            fms_amplitude_spectrum(x.as_ptr(), x.len(), dt, FmsWindow::Hann as i32, 4, &mut spec),
            FmsStatus::Ok
        );
        let n = fms_spectrum_len(spec);
        let mut f = vec![0.0; n];
        assert_eq!(fms_spectrum_copy(spec, f.as_mut_ptr(), ptr::null_mut(), n), FmsStatus::Ok);
        assert_eq!(f[0], 0.0);
        let (mut pf, mut pa) = (0.0, 0.0);
        assert_eq!(fms_spectrum_peak(spec, 7.3, 0.2, &mut pf, &mut pa), FmsStatus::Ok);
        assert!((pf - 7.3).abs() < 1e-3);
        assert!((pa - 0.5).abs() < 5e-3);
        fms_spectrum_free(spec);
        assert_eq!(
            fms_amplitude_spectrum(x.as_ptr(), x.len(), 0.0, 1, 4, &mut spec),
            FmsStatus::InvalidArgument
        );
        assert_eq!(
            fms_amplitude_spectrum(x.as_ptr(), x.len(), dt, 7, 4, &mut spec),
            FmsStatus::InvalidArgument
        );
    }
}

#[test]
fn scalar_functions() {
    assert!((fms_bessel_j(0, 0.0) - 1.0).abs() < 1e-15);
    assert!((fms_bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
    unsafe {
        let mut m = 0.0;
        assert_eq!(fms_modulation_index(2.25e-9, 1.0, &mut m), FmsStatus::Ok);
        assert!((m - 0.02655).abs() < 1e-12);
        assert_eq!(fms_modulation_index(1e-9, 0.0, &mut m), FmsStatus::InvalidArgument);

        let mut b = 0.0;
        assert_eq!(fms_field_sensitivity(4e-5, 5.5e-3, 1e-3, &mut b), FmsStatus::Ok);
        assert!(b > 7.0e-15 && b < 7.5e-15);
        assert_eq!(fms_field_sensitivity(4e-5, 0.0, 1e-3, &mut b), FmsStatus::InvalidArgument);

        let mut g = 0.0;
        assert_eq!(fms_coupling_limit(2.7e-8, 1e4, &mut g), FmsStatus::Ok);
        assert!((g - 2.7e-10).abs() < 1e-22);

        let mut count = 0usize;
        assert_eq!(fms_sideband_count(1.1186e-8, 1.0, 0.01, &mut count), FmsStatus::Ok);
        assert_eq!(count, 3);
        assert_eq!(fms_sideband_count(1e-9, 1.0, 0.01, ptr::null_mut()), FmsStatus::NullPointer);
    }
    let v = unsafe { CStr::from_ptr(fms_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn errors_are_thread_local() {
    unsafe {
        let cfg = fms_config_new();
        let k = CString::new("bogus").unwrap();
        fms_config_set(cfg, k.as_ptr(), 1.0);
        assert!(!fms_last_error().is_null());
        std::thread::spawn(|| assert!(fms_last_error().is_null())).join().unwrap();
        fms_config_free(cfg);
    }
}
