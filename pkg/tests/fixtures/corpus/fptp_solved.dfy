// First Past the Post: fill in the operator that makes xor true exactly
// when one of its arguments is true.
method xor(a : bool, b : bool) returns (t : bool)
  ensures t == ((a || b) && !(a && b))
{
  t := a != b;
}

method Main() {
  var r := xor(true, false);
  assert r;
  print r, "\n";
}
