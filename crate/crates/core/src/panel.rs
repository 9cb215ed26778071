//! Daily topic panels, index prices, lagged design matrices, scaling and
//! chronological splits.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::NewsItem;
use crate::dates::DateRange;
use crate::sentiment::SentimentScore;
use crate::topics::TopicCatalog;

/// Price columns in their fixed order.
pub const PRICE_COLUMNS: [&str; 4] = ["open", "high", "low", "close"];
const CLOSE: usize = 3;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no data: {0}")]
    NoData(String),
    #[error("price row {row}: {message}")]
    Price { row: usize, message: String },
    #[error("panel dates and price dates do not overlap")]
    NoOverlap,
    #[error("{rows} rows are too few for lag depth {lags} (need at least {})", lags + 1)]
    TooFewRows { rows: usize, lags: usize },
    #[error("lag depth must be positive")]
    ZeroLag,
    #[error("topic {0:?} collides with a price column name")]
    NameCollision(String),
    #[error("scaler applied before fitting")]
    ScalerNotFitted,
    #[error("matrix is already scaled")]
    AlreadyScaled,
    #[error("scaler has no range for column {0:?}")]
    MissingColumn(String),
    #[error("train range {train} overlaps test range {test}")]
    OverlappingSplit { train: DateRange, test: DateRange },
    #[error("empty date range {0}")]
    EmptyRange(DateRange),
    #[error("{0} split has no rows")]
    EmptySplit(&'static str),
    #[error("unknown aggregation {0:?} (expected mean, sum or last)")]
    UnknownAggregation(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// How several same-day scores for one topic collapse into one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
    Last,
}

impl FromStr for Aggregation {
    type Err = PanelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            "last" => Ok(Aggregation::Last),
            _ => Err(PanelError::UnknownAggregation(s.to_string())),
        }
    }
}

/// Date × topic sentiment matrix. Rows cover every calendar day between the
/// first and last scored item; absent topic-days hold 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPanel {
    pub dates: Vec<NaiveDate>,
    pub topics: Vec<String>,
    pub values: DMatrix<f64>,
}

impl DailyPanel {
    pub fn get(&self, date: NaiveDate, topic: &str) -> Option<f64> {
        let r = self.dates.binary_search(&date).ok()?;
        let c = self.topics.iter().position(|t| t == topic)?;
        Some(self.values[(r, c)])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.topics.iter().cloned());
        w.write_record(&header)?;
        for (r, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.to_string()];
            rec.extend(self.values.row(r).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct Cell {
    sum: f64,
    count: usize,
    last: f64,
}

pub fn aggregate_daily(
    items: &[NewsItem],
    scores: &[SentimentScore],
    catalog: &TopicCatalog,
    aggregation: Aggregation,
) -> Result<DailyPanel, PanelError> {
    let by_id: HashMap<&str, f64> = scores.iter().map(|s| (s.id.as_str(), s.value)).collect();
    let topic_index: HashMap<&str, usize> = catalog
        .retained
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut cells: BTreeMap<(NaiveDate, usize), Cell> = BTreeMap::new();
    for item in items {
        let Some(col) = item.topic.as_deref().and_then(|t| topic_index.get(t)) else {
            continue;
        };
        let Some(&value) = by_id.get(item.id.as_str()) else {
            continue;
        };
        let cell = cells.entry((item.date, *col)).or_default();
        cell.sum += value;
        cell.count += 1;
        cell.last = value;
    }
    let (Some(first), Some(last)) = (cells.keys().next(), cells.keys().next_back()) else {
        return Err(PanelError::NoData(
            "no scored item carries a retained topic".into(),
        ));
    };
    let dates: Vec<NaiveDate> = DateRange::new(first.0, last.0).days().collect();
    let mut values = DMatrix::zeros(dates.len(), catalog.retained.len());
    for ((date, col), cell) in cells {
        let row = (date - dates[0]).num_days() as usize;
        values[(row, col)] = match aggregation {
            Aggregation::Mean => cell.sum / cell.count as f64,
            Aggregation::Sum => cell.sum,
            Aggregation::Last => cell.last,
        };
    }
    Ok(DailyPanel {
        dates,
        topics: catalog.retained.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcRow {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcRow {
    fn as_array(&self) -> [f64; 4] {
        [self.open, self.high, self.low, self.close]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcSeries {
    pub rows: Vec<OhlcRow>,
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    ["%Y-%m-%d", "%d-%b-%Y", "%d %b %Y"]
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(raw, fmt).ok())
}

fn parse_price(raw: &str) -> Option<f64> {
    let cleaned: String = raw.chars().filter(|c| *c != ',' && !c.is_whitespace()).collect();
    cleaned.parse::<f64>().ok()
}

/// Parses a CSV with (at least) `Date,Open,High,Low,Close` columns, in any
/// order and case. Rows are returned sorted by date.
pub fn read_ohlc<R: Read>(reader: R) -> Result<OhlcSeries, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().all(str::is_empty) {
        return Err(PanelError::NoData("empty price file".into()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| PanelError::Price {
                row: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let date_col = find("date")?;
    let price_cols = [find("open")?, find("high")?, find("low")?, find("close")?];

    let mut rows: Vec<(usize, OhlcRow)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let date = parse_date(field(date_col)).ok_or_else(|| PanelError::Price {
            row,
            message: format!("bad date {:?}", field(date_col)),
        })?;
        let mut p = [0.0; 4];
        for (k, &col) in price_cols.iter().enumerate() {
            p[k] = parse_price(field(col))
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| PanelError::Price {
                    row,
                    message: format!("{} {:?} is not a positive number", PRICE_COLUMNS[k], field(col)),
                })?;
        }
        let r = OhlcRow {
            date,
            open: p[0],
            high: p[1],
            low: p[2],
            close: p[3],
        };
        if !(r.low <= r.open.min(r.close) && r.open.max(r.close) <= r.high) {
            return Err(PanelError::Price {
                row,
                message: format!(
                    "violates low <= open, close <= high (o={} h={} l={} c={})",
                    r.open, r.high, r.low, r.close
                ),
            });
        }
        rows.push((row, r));
    }
    if rows.is_empty() {
        return Err(PanelError::NoData("price file has no rows".into()));
    }
    rows.sort_by_key(|(_, r)| r.date);
    for pair in rows.windows(2) {
        if pair[0].1.date == pair[1].1.date {
            return Err(PanelError::Price {
                row: pair[0].0.max(pair[1].0),
                message: format!("duplicate date {}", pair[1].1.date),
            });
        }
    }
    Ok(OhlcSeries {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}

pub fn load_ohlc(path: impl AsRef<Path>) -> Result<OhlcSeries, PanelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PanelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_ohlc(file)
}

/// Panel rows left-joined with prices, prices carried forward over
/// non-trading days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedTable {
    pub dates: Vec<NaiveDate>,
    pub topics: Vec<String>,
    pub sentiment: DMatrix<f64>,
    /// Columns in [`PRICE_COLUMNS`] order.
    pub prices: DMatrix<f64>,
    /// Trading date each price row was taken from (`<=` the row date).
    pub price_dates: Vec<NaiveDate>,
    pub dropped_leading: usize,
}

impl JoinedTable {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn is_trading_day(&self, row: usize) -> bool {
        self.price_dates[row] == self.dates[row]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.topics.iter().cloned());
        header.extend(PRICE_COLUMNS.iter().map(|s| s.to_string()));
        header.push("price_date".into());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec = vec![self.dates[r].to_string()];
            rec.extend(self.sentiment.row(r).iter().map(|v| v.to_string()));
            rec.extend(self.prices.row(r).iter().map(|v| v.to_string()));
            rec.push(self.price_dates[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Keeps every panel date and attaches the most recent price row on or
/// before it. Panel dates earlier than the first price row are dropped.
pub fn join_calendar(panel: &DailyPanel, ohlc: &OhlcSeries) -> Result<JoinedTable, PanelError> {
    if panel.dates.is_empty() {
        return Err(PanelError::NoData("empty panel".into()));
    }
    if ohlc.rows.is_empty() {
        return Err(PanelError::NoData("empty price series".into()));
    }
    let mut keep = Vec::new();
    let mut price_idx = Vec::new();
    let mut exact = 0usize;
    let mut p = 0usize;
    for (r, &date) in panel.dates.iter().enumerate() {
        while p + 1 < ohlc.rows.len() && ohlc.rows[p + 1].date <= date {
            p += 1;
        }
        if ohlc.rows[p].date > date {
            continue;
        }
        if ohlc.rows[p].date == date {
            exact += 1;
        }
        keep.push(r);
        price_idx.push(p);
    }
    if exact == 0 {
        return Err(PanelError::NoOverlap);
    }
    let dropped_leading = panel.dates.len() - keep.len();
    if dropped_leading > 0 {
        log::warn!("dropped {dropped_leading} leading panel dates that precede the first price row");
    }
    let n = keep.len();
    let sentiment = panel.values.select_rows(keep.iter());
    let prices = DMatrix::from_fn(n, 4, |r, c| ohlc.rows[price_idx[r]].as_array()[c]);
    Ok(JoinedTable {
        dates: keep.iter().map(|&r| panel.dates[r]).collect(),
        topics: panel.topics.clone(),
        sentiment,
        prices,
        price_dates: price_idx.iter().map(|&p| ohlc.rows[p].date).collect(),
        dropped_leading,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Sentiment,
    Price,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub base: String,
    pub lag: usize,
    pub kind: FeatureKind,
}

/// `true` for lagged open/high/low/close feature names such as `close_lag2`.
pub fn is_price_feature(name: &str) -> bool {
    match name.rsplit_once("_lag") {
        Some((base, lag)) => {
            PRICE_COLUMNS.contains(&base) && !lag.is_empty() && lag.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    WithSentiment,
    PriceOnly,
}

/// Lagged feature matrix with the same-day close as target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<FeatureColumn>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lag_depth: usize,
    pub trading_day: Vec<bool>,
    pub scaled: bool,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            dates: rows.iter().map(|&r| self.dates[r]).collect(),
            columns: self.columns.clone(),
            x: self.x.select_rows(rows.iter()),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            lag_depth: self.lag_depth,
            trading_day: rows.iter().map(|&r| self.trading_day[r]).collect(),
            scaled: self.scaled,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.push("target".into());
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = vec![self.dates[r].to_string()];
            rec.extend(self.x.row(r).iter().map(|v| v.to_string()));
            rec.push(self.y[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Builds `<base>_lag<k>` features for k in 1..=lags over joined rows.
///
/// Base columns are the topics (unless `PriceOnly`) followed by
/// open/high/low/close. Row `t` takes feature `c_lagk` from row `t - k`; the
/// first `lags` rows have no complete history and are dropped.
pub fn make_lagged(
    joined: &JoinedTable,
    lags: usize,
    features: FeatureSet,
) -> Result<DesignMatrix, PanelError> {
    if lags == 0 {
        return Err(PanelError::ZeroLag);
    }
    if joined.len() < lags + 1 {
        return Err(PanelError::TooFewRows {
            rows: joined.len(),
            lags,
        });
    }
    if let Some(t) = joined.topics.iter().find(|t| PRICE_COLUMNS.contains(&t.as_str())) {
        return Err(PanelError::NameCollision(t.clone()));
    }

    // (base name, kind, source column)
    let mut bases: Vec<(String, FeatureKind, Box<dyn Fn(usize) -> f64 + '_>)> = Vec::new();
    if features == FeatureSet::WithSentiment {
        for (c, topic) in joined.topics.iter().enumerate() {
            bases.push((
                topic.clone(),
                FeatureKind::Sentiment,
                Box::new(move |r| joined.sentiment[(r, c)]),
            ));
        }
    }
    for (c, name) in PRICE_COLUMNS.iter().enumerate() {
        bases.push((
            name.to_string(),
            FeatureKind::Price,
            Box::new(move |r| joined.prices[(r, c)]),
        ));
    }

    let mut columns = Vec::with_capacity(bases.len() * lags);
    for (base, kind, _) in &bases {
        for k in 1..=lags {
            columns.push(FeatureColumn {
                name: format!("{base}_lag{k}"),
                base: base.clone(),
                lag: k,
                kind: *kind,
            });
        }
    }

    let n = joined.len() - lags;
    let mut x = DMatrix::zeros(n, columns.len());
    for (b, (_, _, source)) in bases.iter().enumerate() {
        for k in 1..=lags {
            let col = b * lags + (k - 1);
            for i in 0..n {
                let t = i + lags;
                x[(i, col)] = source(t - k);
            }
        }
    }
    let y = DVector::from_fn(n, |i, _| joined.prices[(i + lags, CLOSE)]);
    Ok(DesignMatrix {
        dates: joined.dates[lags..].to_vec(),
        columns,
        x,
        y,
        lag_depth: lags,
        trading_day: (lags..joined.len()).map(|r| joined.is_trading_day(r)).collect(),
        scaled: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        values.fold(None, |acc: Option<ColumnRange>, v| {
            Some(match acc {
                None => ColumnRange { min: v, max: v },
                Some(r) => ColumnRange {
                    min: r.min.min(v),
                    max: r.max.max(v),
                },
            })
        })
    }

    pub fn scale(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn unscale(&self, v: f64) -> f64 {
        if self.max > self.min {
            self.min + v * (self.max - self.min)
        } else {
            self.min
        }
    }
}

/// Min-max scaler for the price-derived features and the target. Sentiment
/// features pass through unchanged. Values outside the fitted range are not
/// clipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    columns: BTreeMap<String, ColumnRange>,
    target: Option<ColumnRange>,
}

impl Scaler {
    pub fn unfitted() -> Self {
        Scaler::default()
    }

    /// Fits on every row of `train`.
    pub fn fit(train: &DesignMatrix) -> Result<Self, PanelError> {
        if train.scaled {
            return Err(PanelError::AlreadyScaled);
        }
        let target = ColumnRange::of(train.y.iter().copied())
            .ok_or_else(|| PanelError::NoData("scaler fitted on zero rows".into()))?;
        let mut columns = BTreeMap::new();
        for (c, col) in train.columns.iter().enumerate() {
            if col.kind == FeatureKind::Price {
                let range = ColumnRange::of(train.x.column(c).iter().copied()).expect("rows > 0");
                columns.insert(col.name.clone(), range);
            }
        }
        Ok(Scaler {
            columns,
            target: Some(target),
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.target.is_some()
    }

    pub fn target_range(&self) -> Option<ColumnRange> {
        self.target
    }

    pub fn column_range(&self, name: &str) -> Option<ColumnRange> {
        self.columns.get(name).copied()
    }

    fn transform(
        &self,
        m: &DesignMatrix,
        f: impl Fn(&ColumnRange, f64) -> f64,
    ) -> Result<DesignMatrix, PanelError> {
        let target = self.target.as_ref().ok_or(PanelError::ScalerNotFitted)?;
        let mut out = m.clone();
        for (c, col) in m.columns.iter().enumerate() {
            if col.kind != FeatureKind::Price {
                continue;
            }
            let range = self
                .columns
                .get(&col.name)
                .ok_or_else(|| PanelError::MissingColumn(col.name.clone()))?;
            for v in out.x.column_mut(c).iter_mut() {
                *v = f(range, *v);
            }
        }
        for v in out.y.iter_mut() {
            *v = f(target, *v);
        }
        Ok(out)
    }

    pub fn apply(&self, m: &DesignMatrix) -> Result<DesignMatrix, PanelError> {
        if m.scaled {
            return Err(PanelError::AlreadyScaled);
        }
        let mut out = self.transform(m, |r, v| r.scale(v))?;
        out.scaled = true;
        Ok(out)
    }

    /// Inverse of [`Scaler::apply`] (constant columns map back to their value).
    pub fn invert(&self, m: &DesignMatrix) -> Result<DesignMatrix, PanelError> {
        let mut out = self.transform(m, |r, v| r.unscale(v))?;
        out.scaled = false;
        Ok(out)
    }

    pub fn scale_target(&self, v: f64) -> Result<f64, PanelError> {
        Ok(self.target.ok_or(PanelError::ScalerNotFitted)?.scale(v))
    }

    pub fn unscale_target(&self, v: f64) -> Result<f64, PanelError> {
        Ok(self.target.ok_or(PanelError::ScalerNotFitted)?.unscale(v))
    }
}

pub fn fit_scaler(matrix: &DesignMatrix, train_rows: &[usize]) -> Result<Scaler, PanelError> {
    Scaler::fit(&matrix.select_rows(train_rows))
}

pub fn apply_scaler(scaler: &Scaler, matrix: &DesignMatrix) -> Result<DesignMatrix, PanelError> {
    scaler.apply(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
    Neither,
}

/// Chronological train/test ranges with excluded periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: DateRange,
    pub test: DateRange,
    #[serde(default)]
    pub exclude: Vec<DateRange>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

impl Default for SplitPlan {
    /// Train through 2023-08-31, test 2023-10-01..2024-02-22, September 2023
    /// excluded.
    fn default() -> Self {
        SplitPlan {
            train: DateRange::new(ymd(2021, 1, 1), ymd(2023, 8, 31)),
            test: DateRange::new(ymd(2023, 10, 1), ymd(2024, 2, 22)),
            exclude: vec![DateRange::new(ymd(2023, 9, 1), ymd(2023, 9, 30))],
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<(), PanelError> {
        for r in [&self.train, &self.test].into_iter().chain(&self.exclude) {
            if r.is_empty() {
                return Err(PanelError::EmptyRange(*r));
            }
        }
        if self.train.overlaps(&self.test) {
            return Err(PanelError::OverlappingSplit {
                train: self.train,
                test: self.test,
            });
        }
        Ok(())
    }

    pub fn side(&self, date: NaiveDate) -> Side {
        if self.exclude.iter().any(|r| r.contains(date)) {
            Side::Neither
        } else if self.train.contains(date) {
            Side::Train
        } else if self.test.contains(date) {
            Side::Test
        } else {
            Side::Neither
        }
    }
}

pub fn split(matrix: &DesignMatrix, plan: &SplitPlan) -> Result<(DesignMatrix, DesignMatrix), PanelError> {
    plan.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (r, &d) in matrix.dates.iter().enumerate() {
        match plan.side(d) {
            Side::Train => train.push(r),
            Side::Test => test.push(r),
            Side::Neither => {}
        }
    }
    if train.is_empty() {
        return Err(PanelError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(PanelError::EmptySplit("test"));
    }
    Ok((matrix.select_rows(&train), matrix.select_rows(&test)))
}
