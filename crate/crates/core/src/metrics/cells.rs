use alloc::string::String;
use alloc::vec::Vec;

use super::formula::multiset_f1;
use crate::markup::TableGrid;

/// Share of aligned occupancy coordinates holding equal cell text, over the
/// larger occupied-coordinate count. Two empty grids match fully.
pub fn cell_matching_rate(a: &TableGrid, b: &TableGrid) -> f64 {
    let (oa, ob) = (a.occupancy(), b.occupancy());
    let denom = oa.occupied().max(ob.occupied());
    if denom == 0 {
        return 1.0;
    }
    let texts = |g: &TableGrid| -> Vec<Vec<String>> {
        g.rows.iter().map(|r| r.cells.iter().map(|c| c.text()).collect()).collect()
    };
    let (ta, tb) = (texts(a), texts(b));
    let mut equal = 0usize;
    for (ra, rb) in oa.slots.iter().zip(&ob.slots) {
        for (sa, sb) in ra.iter().zip(rb) {
            if let (Some((r1, c1)), Some((r2, c2))) = (sa, sb) {
                if ta[*r1][*c1] == tb[*r2][*c2] {
                    equal += 1;
                }
            }
        }
    }
    equal as f64 / denom as f64
}

/// Decimal number tokens in order of appearance. A leading minus sign binds
/// when it is not preceded by an alphanumeric character.
pub fn extract_numbers(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() && (i == 0 || !chars[i - 1].is_ascii_digit()) {
            let mut start = i;
            if i > 0 && chars[i - 1] == '-' && (i < 2 || !chars[i - 2].is_alphanumeric()) {
                start = i - 1;
            }
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            out.push(chars[start..j].iter().collect());
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

pub fn numerical_consistency(a: &str, b: &str) -> f64 {
    multiset_f1(&extract_numbers(a), &extract_numbers(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markup::parse_html_table;
    use alloc::vec;

    fn grid(html: &str) -> TableGrid {
        parse_html_table(html).unwrap()
    }

    #[test]
    fn cell_matching() {
        let a = grid("<table><tr><td>1</td><td>2</td></tr><tr><td>3</td><td>4</td></tr></table>");
        let b = grid("<table><tr><td>1</td><td>2</td></tr><tr><td>3</td><td>5</td></tr></table>");
        let c = grid("<table><tr><td>w</td><td>x</td></tr><tr><td>y</td><td>z</td></tr></table>");
        assert_eq!(cell_matching_rate(&a, &a), 1.0);
        assert_eq!(cell_matching_rate(&a, &c), 0.0);
        assert_eq!(cell_matching_rate(&a, &b), 0.75);
    }

    #[test]
    fn numbers() {
        assert_eq!(extract_numbers("x-1 and -2.5, 3.x 10"), vec!["1", "-2.5", "3", "10"]);
        assert_eq!(numerical_consistency("1 2", "1 2"), 1.0);
        assert_eq!(numerical_consistency("1 2", "1 3"), 0.5);
        assert_eq!(numerical_consistency("none", "here"), 1.0);
        assert_eq!(numerical_consistency("7", "none"), 0.0);
    }
}
