use rrl_harness::plot::{emit_plot, PlotStyle};
use rrl_harness::HarnessError;

const TWO_BY_THREE: &str = "\
# rrl-aggregate v1
algorithm,perturbation,level,mean_return,std_return,instances
arq,action,0,-13,0,5
arq,action,0.1,-20,4,5
arq,action,0.2,-31,6,5
q-learning,action,0,-13,0,5
q-learning,action,0.1,-40,8,5
q-learning,action,0.2,-90,10,5
";

fn style() -> PlotStyle {
    PlotStyle::default()
}

#[test]
fn one_line_and_band_per_algorithm() {
    let plot = emit_plot("agg.csv", TWO_BY_THREE, &style()).unwrap();
    assert_eq!(plot.svg.matches("<polyline").count(), 2);
    assert_eq!(plot.svg.matches(r#"class="band""#).count(), 2);
    assert!(plot.svg.starts_with("<svg") && plot.svg.trim_end().ends_with("</svg>"));
    assert!(plot.warnings.is_empty());
    assert_eq!(plot.series[1].name, "q-learning");
    assert_eq!(plot.series[1].points[2], (0.2, -90.0, Some(10.0)));
}

#[test]
fn output_is_deterministic() {
    let a = emit_plot("agg.csv", TWO_BY_THREE, &style()).unwrap();
    let b = emit_plot("agg.csv", TWO_BY_THREE, &style()).unwrap();
    assert_eq!(a.svg, b.svg);
}

fn polyline_ys(svg: &str) -> Vec<String> {
    let start = svg.find("points=\"").unwrap() + 8;
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end].split(' ').map(|p| p.split(',').nth(1).unwrap().to_string()).collect()
}

#[test]
fn constant_series_is_flat_with_zero_height_band() {
    let csv = "level,mean_return,std_return\n0,5,0\n0.1,5,0\n0.2,5,0\n";
    let plot = emit_plot("c.csv", csv, &style()).unwrap();
    let ys = polyline_ys(&plot.svg);
    assert_eq!(ys.len(), 3);
    assert!(ys.iter().all(|y| y == &ys[0]));
    let band_start = plot.svg.find(r#"class="band" d=""#).unwrap() + 16;
    let band_end = band_start + plot.svg[band_start..].find('"').unwrap();
    let band = &plot.svg[band_start..band_end];
    assert!(band
        .split(' ')
        .filter(|t| t.contains(','))
        .all(|t| t.split(',').nth(1).unwrap() == ys[0]));
}

#[test]
fn missing_std_column_omits_bands_with_warning() {
    let csv = "algorithm,level,mean_return\na,0,1\na,1,2\nb,0,3\nb,1,1\n";
    let plot = emit_plot("m.csv", csv, &style()).unwrap();
    assert_eq!(plot.svg.matches("<polyline").count(), 2);
    assert_eq!(plot.svg.matches(r#"class="band""#).count(), 0);
    assert_eq!(plot.warnings.len(), 1);
}

#[test]
fn malformed_value_reports_its_line() {
    let csv = "# rrl-aggregate v1\nalgorithm,perturbation,level,mean_return,std_return,instances\narq,action,0,oops,0,5\n";
    match emit_plot("bad.csv", csv, &style()) {
        Err(HarnessError::Parse { line, msg, .. }) => {
            assert_eq!(line, 3);
            assert!(msg.contains("mean_return"));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn training_logs_plot_by_step() {
    let csv = "step,train_return,eval_return_mean,eval_return_std,loss_q_pi,loss_q_phi\n300,,-500,20,0.1,\n600,-300,-250,10,0.05,\n";
    let plot = emit_plot("log.csv", csv, &style()).unwrap();
    assert_eq!(plot.series.len(), 1);
    assert_eq!(plot.series[0].points, vec![(300.0, -500.0, Some(20.0)), (600.0, -250.0, Some(10.0))]);
}
