//! Item popularity, per-user popularity inclination and the three-way
//! LowPop/MedPop/HighPop user split.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{InteractionDataset, ItemId, SparseMatrix, UserId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile<T> {
    /// Distinct users per item.
    item_counts: Vec<usize>,
    /// `item_counts / |U|`.
    item_popularity: Vec<T>,
    /// Mean item popularity over the user's profile; `None` for empty profiles.
    user_inclination: Vec<Option<T>>,
}

impl<T: Scalar> PopularityProfile<T> {
    pub fn item_popularity(&self, item: ItemId) -> T {
        self.item_popularity[item.index()]
    }

    pub fn item_count(&self, item: ItemId) -> usize {
        self.item_counts[item.index()]
    }

    pub fn item_counts(&self) -> &[usize] {
        &self.item_counts
    }

    pub fn popularities(&self) -> &[T] {
        &self.item_popularity
    }

    /// Per-user profile GAP.
    pub fn inclination(&self, user: UserId) -> Option<T> {
        self.user_inclination[user.index()]
    }

    pub fn num_users(&self) -> usize {
        self.user_inclination.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_popularity.len()
    }

    /// Mean popularity of a list of items, or `None` if the list is empty.
    pub fn mean_popularity(&self, items: &[ItemId]) -> Option<T> {
        if items.is_empty() {
            return None;
        }
        let sum: T = items.iter().map(|&i| self.item_popularity(i)).sum();
        Some(sum / T::of_usize(items.len()))
    }
}

pub fn popularity_profile<T: Scalar>(
    dataset: &InteractionDataset<T>,
) -> Result<PopularityProfile<T>> {
    popularity_from_matrix(&SparseMatrix::from_dataset(dataset))
}

/// Popularity from an interaction matrix; rating values are ignored.
pub fn popularity_from_matrix<T: Scalar>(matrix: &SparseMatrix<T>) -> Result<PopularityProfile<T>> {
    if matrix.num_rows() == 0 || matrix.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let users = T::of_usize(matrix.num_rows());
    let item_counts: Vec<usize> = (0..matrix.num_cols())
        .map(|i| matrix.col_len(ItemId::from_index(i)))
        .collect();
    let item_popularity: Vec<T> = item_counts
        .iter()
        .map(|&c| T::of_usize(c) / users)
        .collect();
    let user_inclination = (0..matrix.num_rows())
        .map(|u| {
            let (items, _) = matrix.row(UserId::from_index(u));
            if items.is_empty() {
                return None;
            }
            let sum: T = items.iter().map(|i| item_popularity[i.index()]).sum();
            Some(sum / T::of_usize(items.len()))
        })
        .collect();
    Ok(PopularityProfile {
        item_counts,
        item_popularity,
        user_inclination,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Group {
    LowPop,
    MedPop,
    HighPop,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::LowPop, Group::MedPop, Group::HighPop];

    pub fn label(self) -> &'static str {
        match self {
            Group::LowPop => "LowPop",
            Group::MedPop => "MedPop",
            Group::HighPop => "HighPop",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGroups {
    members: [Vec<UserId>; 3],
    group_of: Vec<Option<Group>>,
}

impl UserGroups {
    /// Members of a group, ascending by inclination.
    pub fn members(&self, group: Group) -> &[UserId] {
        &self.members[group as usize]
    }

    pub fn group_of(&self, user: UserId) -> Option<Group> {
        self.group_of.get(user.index()).copied().flatten()
    }

    pub fn sizes(&self) -> [usize; 3] {
        [
            self.members[0].len(),
            self.members[1].len(),
            self.members[2].len(),
        ]
    }
}

/// Sort users with a profile by `(inclination, id)` and cut at `n/3`, `2n/3`.
pub fn split_groups<T: Scalar>(profile: &PopularityProfile<T>) -> Result<UserGroups> {
    let mut ranked: Vec<(T, UserId)> = (0..profile.num_users())
        .filter_map(|u| {
            let user = UserId::from_index(u);
            profile.inclination(user).map(|g| (g, user))
        })
        .collect();
    let n = ranked.len();
    if n < 3 {
        return Err(Error::TooFewUsers(n));
    }
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let (first, second) = (n / 3, 2 * n / 3);
    let mut group_of = vec![None; profile.num_users()];
    let mut members: [Vec<UserId>; 3] = Default::default();
    for (rank, &(_, user)) in ranked.iter().enumerate() {
        let group = if rank < first {
            Group::LowPop
        } else if rank < second {
            Group::MedPop
        } else {
            Group::HighPop
        };
        group_of[user.index()] = Some(group);
        members[group as usize].push(user);
    }
    Ok(UserGroups { members, group_of })
}

/// CSV `user,inclination,group` in user-id order.
pub fn write_groups_csv<T: Scalar, W: Write>(
    out: W,
    dataset: &InteractionDataset<T>,
    profile: &PopularityProfile<T>,
    groups: &UserGroups,
) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(["user", "inclination", "group"])?;
    for u in 0..profile.num_users() {
        let user = UserId::from_index(u);
        let (Some(incl), Some(group)) = (profile.inclination(user), groups.group_of(user)) else {
            continue;
        };
        writer.write_record([
            dataset.user_key(user),
            &incl.as_f64().to_string(),
            group.label(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
