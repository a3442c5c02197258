method add(a : int, b : int) returns (r : int)
  requires a >= 0
  requires b >= 0
  ensures r >= a
  ensures r >= b
{
  r := a + b;
}
