"""Brute-force reference interpreter for the block game.

Deliberately independent of the library: plain lists, explicit per-position
predicates, no imports from blocktalk.  Written straight from the grammar
semantics and used as the ground truth the real interpreter is checked
against.
"""


def pile_is_selected(position, index):
    # index is 1-based, left to right
    if position == "1st":
        return index == 1
    if position == "2nd":
        return index == 2
    if position == "3rd":
        return index == 3
    if position == "4th":
        return index == 4
    if position == "5th":
        return index == 5
    if position == "6th":
        return index == 6
    if position == "even":
        return index % 2 == 0
    if position == "odd":
        return index % 2 == 1
    if position == "leftmost":
        return index == 1
    if position == "rightmost":
        return index == 6
    if position == "every":
        return True
    raise ValueError(position)


def reference_apply(verb, color, position, piles):
    result = []
    for index in range(1, 7):
        pile = list(piles[index - 1])
        if pile_is_selected(position, index):
            if verb == "add":
                if len(pile) < 3:
                    pile.append(color)
            elif verb == "remove":
                if len(pile) > 0 and pile[-1] == color:
                    pile.pop()
            else:
                raise ValueError(verb)
        result.append(tuple(pile))
    return tuple(result)
